#include "nrep/catalog.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

#include "nrep/log.hpp"
#include "nrep/sqlite_db.hpp"
#include "nrep/text.hpp"

namespace nrep {

namespace fs = std::filesystem;

namespace {

std::string kind_label(CatalogError::Kind kind) {
    switch (kind) {
        case CatalogError::Kind::Unreadable: return "unreadable database";
        case CatalogError::Kind::Malformed: return "malformed database";
        case CatalogError::Kind::IntrospectionFailed: return "introspection failed";
        case CatalogError::Kind::Invalid: return "invalid catalog";
    }
    return "catalog error";
}

bool is_text_type(std::string_view sql_type) {
    std::string upper = to_lower(sql_type);
    return upper.find("char") != std::string::npos || upper.find("text") != std::string::npos ||
           upper.find("clob") != std::string::npos || upper.empty();
}

std::string upper(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

struct TableEntry {
    std::string name;
    std::string sql;
};

std::vector<TableEntry> list_base_tables(Database& db) {
    std::vector<TableEntry> entries;
    auto stmt = db.prepare(
        "SELECT name, COALESCE(sql, '') FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' "
        "ORDER BY rowid");
    while (stmt.step()) entries.push_back({stmt.column_text(0), stmt.column_text(1)});

    std::vector<std::string> virtual_names;
    for (const auto& e : entries) {
        if (starts_with_icase(trim(e.sql), "CREATE VIRTUAL TABLE")) virtual_names.push_back(e.name);
    }
    std::erase_if(entries, [&](const TableEntry& e) {
        for (const auto& v : virtual_names) {
            if (e.name == v || (e.name.size() > v.size() && e.name.compare(0, v.size() + 1, v + "_") == 0)) {
                return true;
            }
        }
        return false;
    });
    return entries;
}

std::vector<std::string> sample_values(Database& db, const std::string& table, const std::string& column,
                                       std::size_t k) {
    std::vector<std::string> out;
    if (k == 0) return out;
    auto stmt = db.prepare("SELECT " + quote_identifier(column) + " FROM " + quote_identifier(table) +
                           " NOT INDEXED WHERE " + quote_identifier(column) + " IS NOT NULL");
    std::unordered_set<std::string> seen;
    while (out.size() < k && stmt.step()) {
        SqlValue value = stmt.column(0);
        // Typed key so 1 and '1' stay distinct.
        std::string key = std::to_string(value.index()) + ":" + render_value(value);
        if (seen.insert(key).second) out.push_back(render_value(value));
    }
    return out;
}

std::vector<std::string> categorical_values(Database& db, const std::string& table, const std::string& column,
                                            std::size_t limit) {
    if (limit == 0) return {};
    const std::string col = quote_identifier(column);
    auto stmt = db.prepare("SELECT " + col + ", COUNT(*) AS n FROM " + quote_identifier(table) + " WHERE " + col +
                           " IS NOT NULL GROUP BY " + col + " ORDER BY n DESC, " + col + " ASC LIMIT " +
                           std::to_string(limit + 1));
    std::vector<std::string> out;
    while (stmt.step()) out.push_back(render_value(stmt.column(0)));
    if (out.size() > limit) return {};
    return out;
}

}  // namespace

CatalogError::CatalogError(Kind kind, std::string db_id, const std::string& detail)
    : std::runtime_error(kind_label(kind) + " '" + db_id + "': " + detail), kind_(kind), db_id_(std::move(db_id)) {}

const ColumnDef* TableDef::find_column(std::string_view column) const {
    for (const auto& c : columns) {
        if (iequals(c.name, column)) return &c;
    }
    return nullptr;
}

bool TableDef::is_primary_key(std::string_view column) const {
    return std::any_of(primary_key.begin(), primary_key.end(), [&](const std::string& k) { return iequals(k, column); });
}

const TableDef* SchemaCatalog::find_table(std::string_view table) const {
    for (const auto& t : tables) {
        if (iequals(t.name, table)) return &t;
    }
    return nullptr;
}

std::vector<ForeignKeyDef> SchemaCatalog::foreign_keys_from(std::string_view table) const {
    std::vector<ForeignKeyDef> out;
    for (const auto& fk : foreign_keys) {
        if (iequals(fk.from_table, table)) out.push_back(fk);
    }
    return out;
}

std::string_view to_string(FilterLevel level) {
    switch (level) {
        case FilterLevel::NoFiltering: return "none";
        case FilterLevel::TableOnly: return "table";
        case FilterLevel::FullFiltering: return "full";
    }
    return "none";
}

std::optional<FilterLevel> parse_filter_level(std::string_view name) {
    const std::string lowered = to_lower(name);
    if (lowered == "none" || lowered == "no" || lowered == "nofiltering") return FilterLevel::NoFiltering;
    if (lowered == "table" || lowered == "tableonly" || lowered == "table_only") return FilterLevel::TableOnly;
    if (lowered == "full" || lowered == "fullfiltering" || lowered == "column" || lowered == "col") {
        return FilterLevel::FullFiltering;
    }
    return std::nullopt;
}

SchemaCatalog introspect(const std::string& db_path, const IntrospectOptions& options) {
    const fs::path path(db_path);
    const std::string db_id = path.stem().string();

    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        throw CatalogError(CatalogError::Kind::Unreadable, db_id, "no such file: " + db_path);
    }
    if (!std::ifstream(path, std::ios::binary)) {
        throw CatalogError(CatalogError::Kind::Unreadable, db_id, "cannot open for reading: " + db_path);
    }

    std::optional<Database> db;
    std::vector<TableEntry> entries;
    try {
        db.emplace(db_path, Database::Mode::ReadOnly);
        entries = list_base_tables(*db);
    } catch (const SqliteError& e) {
        auto kind = (e.code() == SQLITE_NOTADB || e.code() == SQLITE_CORRUPT) ? CatalogError::Kind::Malformed
                    : e.code() == SQLITE_CANTOPEN                              ? CatalogError::Kind::Unreadable
                                                                               : CatalogError::Kind::IntrospectionFailed;
        throw CatalogError(kind, db_id, e.what());
    }

    SchemaCatalog catalog;
    catalog.db_id = db_id;
    try {
        for (const auto& entry : entries) {
            TableDef table;
            table.name = entry.name;
            std::vector<std::pair<int, std::string>> pk;
            auto info = db->prepare("PRAGMA table_info(" + quote_identifier(entry.name) + ")");
            while (info.step()) {
                ColumnDef column;
                column.name = info.column_text(1);
                column.sql_type = upper(info.column_text(2));
                column.nullable = info.column(3) == SqlValue(std::int64_t{0});
                if (!info.column_is_null(4)) column.default_value = info.column_text(4);
                SqlValue pk_position = info.column(5);
                if (auto* pos = std::get_if<std::int64_t>(&pk_position); pos && *pos > 0) {
                    pk.emplace_back(static_cast<int>(*pos), column.name);
                }
                table.columns.push_back(std::move(column));
            }
            std::sort(pk.begin(), pk.end());
            for (auto& [_, name] : pk) table.primary_key.push_back(name);

            for (auto& column : table.columns) {
                column.value_examples = sample_values(*db, table.name, column.name, options.sample_k);
                if (is_text_type(column.sql_type)) {
                    column.categorical_values = categorical_values(*db, table.name, column.name, options.categorical_limit);
                }
                if (options.descriptions) {
                    auto it = options.descriptions->find({to_lower(table.name), to_lower(column.name)});
                    if (it != options.descriptions->end()) column.description = it->second;
                }
            }
            catalog.tables.push_back(std::move(table));
        }

        for (const auto& table : catalog.tables) {
            // PRAGMA foreign_key_list numbers constraints last-declared first.
            std::vector<std::pair<std::int64_t, ForeignKeyDef>> fks;
            auto list = db->prepare("PRAGMA foreign_key_list(" + quote_identifier(table.name) + ")");
            while (list.step()) {
                ForeignKeyDef fk;
                fk.from_table = table.name;
                fk.to_table = list.column_text(2);
                fk.from_column = list.column_text(3);
                fk.to_column = list.column_is_null(4) ? std::string() : list.column_text(4);
                fks.emplace_back(std::get<std::int64_t>(list.column(0)), std::move(fk));
            }
            std::stable_sort(fks.begin(), fks.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
            for (auto& [_, fk] : fks) {
                const TableDef* target = catalog.find_table(fk.to_table);
                if (!target) {
                    log_warn("catalog '" + db_id + "': foreign key " + fk.from_table + "." + fk.from_column +
                             " references unknown table " + fk.to_table + ", skipped");
                    continue;
                }
                fk.to_table = target->name;
                // REFERENCES t without a column targets the primary key.
                if (fk.to_column.empty() && target->primary_key.size() == 1) fk.to_column = target->primary_key.front();
                const ColumnDef* to_col = target->find_column(fk.to_column);
                const ColumnDef* from_col = table.find_column(fk.from_column);
                if (!to_col || !from_col) {
                    log_warn("catalog '" + db_id + "': foreign key " + fk.from_table + "." + fk.from_column + " -> " +
                             fk.to_table + "." + fk.to_column + " has an unknown endpoint, skipped");
                    continue;
                }
                fk.to_column = to_col->name;
                fk.from_column = from_col->name;
                catalog.foreign_keys.push_back(std::move(fk));
            }
        }
    } catch (const SqliteError& e) {
        auto kind = (e.code() == SQLITE_NOTADB || e.code() == SQLITE_CORRUPT) ? CatalogError::Kind::Malformed
                                                                              : CatalogError::Kind::IntrospectionFailed;
        throw CatalogError(kind, db_id, e.what());
    }
    return catalog;
}

void validate(const SchemaCatalog& catalog) {
    auto fail = [&](const std::string& what) { throw CatalogError(CatalogError::Kind::Invalid, catalog.db_id, what); };
    std::set<std::string> table_names;
    for (const auto& table : catalog.tables) {
        if (!table_names.insert(to_lower(table.name)).second) fail("duplicate table " + table.name);
        std::set<std::string> column_names;
        for (const auto& column : table.columns) {
            if (!column_names.insert(to_lower(column.name)).second) fail("duplicate column " + table.name + "." + column.name);
        }
        for (const auto& key : table.primary_key) {
            if (!table.find_column(key)) fail("primary key column " + table.name + "." + key + " is not a column");
        }
    }
    for (const auto& fk : catalog.foreign_keys) {
        const TableDef* from = catalog.find_table(fk.from_table);
        const TableDef* to = catalog.find_table(fk.to_table);
        if (!from || !to || !from->find_column(fk.from_column) || !to->find_column(fk.to_column)) {
            fail("dangling foreign key " + fk.from_table + "." + fk.from_column + " -> " + fk.to_table + "." + fk.to_column);
        }
    }
}

SchemaCatalog apply_filter(const SchemaCatalog& catalog, const LinkingPrediction& prediction, FilterLevel level) {
    if (level == FilterLevel::NoFiltering) return catalog;

    // Resolve the prediction against the catalog: lower-cased table -> kept columns.
    std::map<std::string, std::set<std::string>> keep;
    for (const auto& [table_name, columns] : prediction.selection) {
        const TableDef* table = catalog.find_table(table_name);
        if (!table) {
            log_warn("linking prediction names unknown table '" + table_name + "' in '" + catalog.db_id + "', dropped");
            continue;
        }
        auto& kept = keep[to_lower(table->name)];
        for (const auto& column : columns) {
            if (const ColumnDef* col = table->find_column(column)) {
                kept.insert(to_lower(col->name));
            } else {
                log_warn("linking prediction names unknown column '" + table_name + "." + column + "' in '" +
                         catalog.db_id + "', dropped");
            }
        }
    }
    if (keep.empty()) {
        log_warn("empty linking prediction for '" + catalog.db_id + "' at " + std::string(to_string(level)) +
                 " filtering yields an empty schema");
    }

    SchemaCatalog out;
    out.db_id = catalog.db_id;
    for (const auto& fk : catalog.foreign_keys) {
        auto from = keep.find(to_lower(fk.from_table));
        auto to = keep.find(to_lower(fk.to_table));
        if (from == keep.end() || to == keep.end()) continue;
        if (level == FilterLevel::FullFiltering) {
            from->second.insert(to_lower(fk.from_column));
            to->second.insert(to_lower(fk.to_column));
        }
        out.foreign_keys.push_back(fk);
    }

    for (const auto& table : catalog.tables) {
        auto it = keep.find(to_lower(table.name));
        if (it == keep.end()) continue;
        if (level == FilterLevel::TableOnly) {
            out.tables.push_back(table);
            continue;
        }
        TableDef filtered;
        filtered.name = table.name;
        for (const auto& column : table.columns) {
            if (it->second.count(to_lower(column.name))) filtered.columns.push_back(column);
        }
        for (const auto& key : table.primary_key) {
            if (it->second.count(to_lower(key))) filtered.primary_key.push_back(key);
        }
        out.tables.push_back(std::move(filtered));
    }
    return out;
}

bool is_sub_catalog(const SchemaCatalog& sub, const SchemaCatalog& super) {
    for (const auto& table : sub.tables) {
        const TableDef* match = super.find_table(table.name);
        if (!match) return false;
        for (const auto& column : table.columns) {
            if (!match->find_column(column.name)) return false;
        }
    }
    return true;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    size_t i = 0;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
    for (; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            field_started = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (field_started || !field.empty() || !row.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            field_started = false;
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

DescriptionMap load_bird_descriptions(const std::string& directory) {
    DescriptionMap out;
    std::error_code ec;
    if (!fs::is_directory(directory, ec)) return out;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        const std::string table = to_lower(file.stem().string());
        auto rows = parse_csv(read_file(file.string()));
        if (rows.empty()) continue;
        const auto& header = rows.front();
        auto index_of = [&](std::string_view name) -> std::optional<size_t> {
            for (size_t i = 0; i < header.size(); ++i) {
                if (iequals(trim(header[i]), name)) return i;
            }
            return std::nullopt;
        };
        auto original = index_of("original_column_name");
        auto expanded = index_of("column_name");
        auto described = index_of("column_description");
        if (!original) continue;
        for (size_t r = 1; r < rows.size(); ++r) {
            const auto& row = rows[r];
            auto cell = [&](std::optional<size_t> idx) { return idx && *idx < row.size() ? trim(row[*idx]) : std::string(); };
            std::string column = cell(original);
            if (column.empty()) continue;
            std::string text = cell(expanded);
            if (text.empty()) text = cell(described);
            if (!text.empty()) out[{table, to_lower(column)}] = text;
        }
    }
    return out;
}

}  // namespace nrep
