#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nrep/prediction.hpp"

namespace nrep {

struct ColumnDef {
    std::string name;
    std::string sql_type;
    std::optional<std::string> description;
    // First distinct non-null values in natural row order, rendered as literals.
    std::vector<std::string> value_examples;
    bool nullable = true;
    std::optional<std::string> default_value;
    // Every distinct non-null value, most frequent first. Only filled for
    // low-cardinality text columns; empty otherwise.
    std::vector<std::string> categorical_values;

    bool operator==(const ColumnDef&) const = default;
};

struct TableDef {
    std::string name;
    std::vector<ColumnDef> columns;
    std::vector<std::string> primary_key;

    const ColumnDef* find_column(std::string_view column) const;
    bool is_primary_key(std::string_view column) const;
    bool operator==(const TableDef&) const = default;
};

struct ForeignKeyDef {
    std::string from_table;
    std::string from_column;
    std::string to_table;
    std::string to_column;

    bool operator==(const ForeignKeyDef&) const = default;
};

// Immutable snapshot of one database's schema. Table, column and foreign key
// order is the order reported by introspection.
struct SchemaCatalog {
    std::string db_id;
    std::vector<TableDef> tables;
    std::vector<ForeignKeyDef> foreign_keys;

    // Name lookups are case-insensitive.
    const TableDef* find_table(std::string_view table) const;
    std::vector<ForeignKeyDef> foreign_keys_from(std::string_view table) const;
    bool operator==(const SchemaCatalog&) const = default;
};

enum class FilterLevel { NoFiltering, TableOnly, FullFiltering };

inline constexpr FilterLevel kAllFilterLevels[] = {FilterLevel::NoFiltering, FilterLevel::TableOnly,
                                                   FilterLevel::FullFiltering};

// Config names: "none", "table", "full".
std::string_view to_string(FilterLevel level);
std::optional<FilterLevel> parse_filter_level(std::string_view name);

class CatalogError : public std::runtime_error {
public:
    enum class Kind { Unreadable, Malformed, IntrospectionFailed, Invalid };

    CatalogError(Kind kind, std::string db_id, const std::string& detail);
    Kind kind() const { return kind_; }
    const std::string& db_id() const { return db_id_; }

private:
    Kind kind_;
    std::string db_id_;
};

// Column descriptions keyed by lower-cased (table, column).
using DescriptionMap = std::map<std::pair<std::string, std::string>, std::string>;

struct IntrospectOptions {
    std::size_t sample_k = 3;
    // Text columns with at most this many distinct values get categorical_values.
    std::size_t categorical_limit = 10;
    const DescriptionMap* descriptions = nullptr;
};

// Reads a SQLite database file. The db_id is the file stem.
SchemaCatalog introspect(const std::string& db_path, const IntrospectOptions& options = {});

// Throws CatalogError(Invalid) naming the first violated invariant.
void validate(const SchemaCatalog& catalog);

// Unknown names in the prediction are dropped with a warning. FullFiltering
// keeps the endpoint columns of every foreign key whose two tables survive.
SchemaCatalog apply_filter(const SchemaCatalog& catalog, const LinkingPrediction& prediction, FilterLevel level);

// True when every table of `sub` is in `super` and every column of each such
// table is in the matching table of `super`.
bool is_sub_catalog(const SchemaCatalog& sub, const SchemaCatalog& super);

// Loads BIRD-style database_description/<table>.csv files. The description of
// a column is its expanded "column_name" entry, falling back to
// "column_description".
DescriptionMap load_bird_descriptions(const std::string& directory);

// Minimal RFC 4180 reader shared by the description loader.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace nrep
