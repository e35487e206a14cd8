#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "nrep/catalog.hpp"

namespace nrep {

enum class RepresentationFormat { MSchema, MacSchema, Ddl, DinSql, JsonRaw, SqlAlchemy };

inline constexpr RepresentationFormat kAllFormats[] = {
    RepresentationFormat::MSchema, RepresentationFormat::MacSchema, RepresentationFormat::Ddl,
    RepresentationFormat::DinSql,  RepresentationFormat::JsonRaw,   RepresentationFormat::SqlAlchemy,
};

// Stable config names: mschema, macschema, ddl, dinsql, json, sqlalchemy.
std::string_view to_string(RepresentationFormat format);
std::optional<RepresentationFormat> parse_format(std::string_view name);

// Renders the catalog in one of the six schema text formats. Non-empty output
// ends with a single newline and carries no trailing whitespace.
std::string render(const SchemaCatalog& catalog, RepresentationFormat format);

std::map<RepresentationFormat, std::string> render_all(const SchemaCatalog& catalog);

// Inverse of the JsonRaw rendering. Sample values, descriptions, nullability
// and defaults are not part of that format and come back empty.
SchemaCatalog parse_json_raw(std::string_view text, std::string db_id);

}  // namespace nrep
