#include "nrep/representation.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>
#include <stdexcept>

#include "nrep/sqlite_db.hpp"
#include "nrep/text.hpp"

namespace nrep {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string render_mschema(const SchemaCatalog& catalog) {
    std::string out = "[DB_ID]  " + catalog.db_id + "\n[Schema]\n";
    for (const auto& table : catalog.tables) {
        out += "# Table: " + table.name + "\n[\n";
        for (size_t i = 0; i < table.columns.size(); ++i) {
            const auto& column = table.columns[i];
            out += "(" + column.name + ":" + column.sql_type;
            if (table.is_primary_key(column.name)) out += ", Primary Key";
            if (!column.value_examples.empty()) out += ", Examples: [" + join(column.value_examples, ", ") + "]";
            out += ")";
            if (i + 1 < table.columns.size()) out += ",";
            out += "\n";
        }
        out += "]\n";
    }
    if (!catalog.foreign_keys.empty()) {
        out += "[Foreign keys]\n";
        for (const auto& fk : catalog.foreign_keys) {
            out += fk.from_table + "." + fk.from_column + "=" + fk.to_table + "." + fk.to_column + "\n";
        }
    }
    return out;
}

bool is_text_column(const ColumnDef& column) {
    const std::string type = to_lower(column.sql_type);
    return type.empty() || type.find("char") != std::string::npos || type.find("text") != std::string::npos ||
           type.find("clob") != std::string::npos;
}

// Column entries carry a trailing comma except the last entry of the document.
size_t total_columns(const SchemaCatalog& catalog) {
    size_t n = 0;
    for (const auto& table : catalog.tables) n += table.columns.size();
    return n;
}

std::string render_macschema(const SchemaCatalog& catalog) {
    std::string out;
    const size_t total = total_columns(catalog);
    size_t emitted = 0;
    for (const auto& table : catalog.tables) {
        out += "# Table: " + table.name + "\n[\n";
        for (const auto& column : table.columns) {
            std::string description = column.description.value_or(column.name);
            if (description.empty() || description.back() != '.') description += ".";
            out += "  (" + column.name + ", " + description;
            if (is_text_column(column) && !column.categorical_values.empty()) {
                std::vector<std::string> quoted;
                for (const auto& value : column.categorical_values) quoted.push_back(python_str_repr(value));
                out += " Value examples: [" + join(quoted, ", ") + "].";
            }
            out += ")";
            if (++emitted < total) out += ",";
            out += "\n";
        }
        out += "]\n";
    }
    return out;
}

std::string ddl_name(const std::string& name) { return is_plain_identifier(name) ? name : quote_identifier(name); }

std::string render_ddl(const SchemaCatalog& catalog) {
    std::string out = catalog.db_id + " CREATE messages:\n";
    for (const auto& table : catalog.tables) {
        out += "\nCREATE TABLE " + ddl_name(table.name) + " (\n";
        for (const auto& column : table.columns) {
            out += "    " + ddl_name(column.name);
            if (!column.sql_type.empty()) out += " " + column.sql_type;
            out += "\n";
        }
        std::vector<std::string> constraints;
        if (!table.primary_key.empty()) {
            std::vector<std::string> keys;
            for (const auto& k : table.primary_key) keys.push_back(ddl_name(k));
            constraints.push_back("PRIMARY KEY (" + join(keys, ", ") + ")");
        }
        for (const auto& fk : catalog.foreign_keys_from(table.name)) {
            constraints.push_back("FOREIGN KEY (" + ddl_name(fk.from_column) + ") REFERENCES " + ddl_name(fk.to_table) +
                                  " (" + ddl_name(fk.to_column) + ")");
        }
        if (!constraints.empty()) {
            out += ",\n";
            for (const auto& c : constraints) out += "    " + c + "\n";
        }
        out += ");\n";
    }
    return out;
}

std::string render_dinsql(const SchemaCatalog& catalog) {
    std::string out;
    for (const auto& table : catalog.tables) {
        std::vector<std::string> columns;
        for (const auto& column : table.columns) columns.push_back(column.name + " (" + column.sql_type + ")");
        out += "table '" + table.name + "' with columns:";
        if (!columns.empty()) out += " " + join(columns, ", ");
        out += "\n";
    }
    if (!catalog.tables.empty()) out += "\n";
    out += "Relations:\n";
    for (const auto& fk : catalog.foreign_keys) {
        out += fk.from_table + "." + fk.from_column + " -> " + fk.to_table + "." + fk.to_column + "\n";
    }
    return out;
}

std::string render_json(const SchemaCatalog& catalog) {
    ordered_json tables = ordered_json::object();
    for (const auto& table : catalog.tables) {
        ordered_json columns = ordered_json::object();
        for (const auto& column : table.columns) columns[column.name] = column.sql_type;
        ordered_json foreign = ordered_json::object();
        for (const auto& fk : catalog.foreign_keys_from(table.name)) {
            // Keyed by source column; a second constraint on the same column is not representable.
            if (foreign.contains(fk.from_column)) continue;
            foreign[fk.from_column] = {{"referenced_table", fk.to_table}, {"referenced_column", fk.to_column}};
        }
        ordered_json entry;
        entry["columns"] = std::move(columns);
        entry["keys"] = {{"primary_key", table.primary_key}};
        entry["foreign_keys"] = std::move(foreign);
        tables[table.name] = std::move(entry);
    }
    ordered_json root;
    root["tables"] = std::move(tables);
    return root.dump(4) + "\n";
}

std::string sqlalchemy_type(std::string_view sql_type) {
    const std::string t = to_lower(sql_type);
    auto has = [&](std::string_view s) { return t.find(s) != std::string::npos; };
    if (has("int")) return "Integer";
    if (has("char")) return "String";
    if (has("text") || has("clob") || t.empty()) return "Text";
    if (has("real") || has("floa") || has("doub")) return "Float";
    if (has("dec") || has("numeric")) return "Numeric";
    if (has("datetime") || has("timestamp")) return "DateTime";
    if (has("date")) return "Date";
    if (has("time")) return "Time";
    if (has("bool")) return "Boolean";
    if (has("blob")) return "LargeBinary";
    return "Text";
}

std::string python_variable(std::string_view name) {
    std::string out = "t_";
    for (char c : name) {
        auto u = static_cast<unsigned char>(c);
        out.push_back(std::isalnum(u) || c == '_' ? c : '_');
    }
    return out;
}

// Referenced tables come before referencing ones; otherwise catalog order.
std::vector<const TableDef*> dependency_order(const SchemaCatalog& catalog) {
    std::vector<const TableDef*> order;
    std::vector<bool> done(catalog.tables.size(), false);
    auto ready = [&](size_t i) {
        for (const auto& fk : catalog.foreign_keys_from(catalog.tables[i].name)) {
            if (iequals(fk.to_table, catalog.tables[i].name)) continue;
            for (size_t j = 0; j < catalog.tables.size(); ++j) {
                if (!done[j] && iequals(catalog.tables[j].name, fk.to_table)) return false;
            }
        }
        return true;
    };
    while (order.size() < catalog.tables.size()) {
        size_t pick = catalog.tables.size();
        for (size_t i = 0; i < catalog.tables.size(); ++i) {
            if (!done[i] && ready(i)) {
                pick = i;
                break;
            }
        }
        if (pick == catalog.tables.size()) {
            // Cycle: fall back to the first pending table.
            pick = static_cast<size_t>(std::find(done.begin(), done.end(), false) - done.begin());
        }
        done[pick] = true;
        order.push_back(&catalog.tables[pick]);
    }
    return order;
}

std::string render_sqlalchemy(const SchemaCatalog& catalog) {
    std::set<std::string> imports = {"Column", "MetaData", "Table"};
    std::string body;
    const size_t total = total_columns(catalog);
    size_t emitted = 0;
    for (const TableDef* table : dependency_order(catalog)) {
        body += "\n\n" + python_variable(table->name) + " = Table(\n    " + python_str_repr(table->name) + ", metadata,\n";
        const auto fks = catalog.foreign_keys_from(table->name);
        for (const auto& column : table->columns) {
            std::vector<std::string> args = {python_str_repr(column.name)};
            std::vector<std::string> refs;
            for (const auto& fk : fks) {
                if (iequals(fk.from_column, column.name)) {
                    refs.push_back("ForeignKey(" + python_str_repr(fk.to_table + "." + fk.to_column) + ")");
                }
            }
            if (refs.empty()) {
                std::string type = sqlalchemy_type(column.sql_type);
                imports.insert(type);
                args.push_back(type);
            } else {
                imports.insert("ForeignKey");
                args.insert(args.end(), refs.begin(), refs.end());
            }
            const bool primary = table->is_primary_key(column.name);
            if (primary) args.push_back("primary_key=True");
            if (!primary && !column.nullable) args.push_back("nullable=False");
            if (column.default_value) {
                imports.insert("text");
                args.push_back("server_default=text(" + python_str_repr(*column.default_value) + ")");
            }
            body += "    Column(" + join(args, ", ") + ")";
            if (++emitted < total) body += ",";
            body += "\n";
        }
        body += ")\n";
    }
    std::string out = "from sqlalchemy import " + join({imports.begin(), imports.end()}, ", ") + "\n\n";
    out += "metadata = MetaData()\n";
    out += body;
    return out;
}

}  // namespace

std::string_view to_string(RepresentationFormat format) {
    switch (format) {
        case RepresentationFormat::MSchema: return "mschema";
        case RepresentationFormat::MacSchema: return "macschema";
        case RepresentationFormat::Ddl: return "ddl";
        case RepresentationFormat::DinSql: return "dinsql";
        case RepresentationFormat::JsonRaw: return "json";
        case RepresentationFormat::SqlAlchemy: return "sqlalchemy";
    }
    return "mschema";
}

std::optional<RepresentationFormat> parse_format(std::string_view name) {
    std::string key;
    for (char c : to_lower(name)) {
        if (c != '-' && c != '_' && c != ' ') key.push_back(c);
    }
    if (key == "mschema") return RepresentationFormat::MSchema;
    if (key == "macschema" || key == "mac") return RepresentationFormat::MacSchema;
    if (key == "ddl" || key == "sqlcreate") return RepresentationFormat::Ddl;
    if (key == "dinsql" || key == "din") return RepresentationFormat::DinSql;
    if (key == "json" || key == "jsonraw" || key == "rawjson") return RepresentationFormat::JsonRaw;
    if (key == "sqlalchemy" || key == "python") return RepresentationFormat::SqlAlchemy;
    return std::nullopt;
}

std::string render(const SchemaCatalog& catalog, RepresentationFormat format) {
    switch (format) {
        case RepresentationFormat::MSchema: return render_mschema(catalog);
        case RepresentationFormat::MacSchema: return render_macschema(catalog);
        case RepresentationFormat::Ddl: return render_ddl(catalog);
        case RepresentationFormat::DinSql: return render_dinsql(catalog);
        case RepresentationFormat::JsonRaw: return render_json(catalog);
        case RepresentationFormat::SqlAlchemy: return render_sqlalchemy(catalog);
    }
    throw std::invalid_argument("unknown representation format");
}

std::map<RepresentationFormat, std::string> render_all(const SchemaCatalog& catalog) {
    std::map<RepresentationFormat, std::string> out;
    for (auto format : kAllFormats) out.emplace(format, render(catalog, format));
    return out;
}

SchemaCatalog parse_json_raw(std::string_view text, std::string db_id) {
    const auto root = ordered_json::parse(text);
    SchemaCatalog catalog;
    catalog.db_id = std::move(db_id);
    for (const auto& [table_name, entry] : root.at("tables").items()) {
        TableDef table;
        table.name = table_name;
        for (const auto& [column_name, type] : entry.at("columns").items()) {
            ColumnDef column;
            column.name = column_name;
            column.sql_type = type.get<std::string>();
            table.columns.push_back(std::move(column));
        }
        table.primary_key = entry.at("keys").at("primary_key").get<std::vector<std::string>>();
        for (const auto& [column_name, ref] : entry.at("foreign_keys").items()) {
            catalog.foreign_keys.push_back({table_name, column_name, ref.at("referenced_table").get<std::string>(),
                                            ref.at("referenced_column").get<std::string>()});
        }
        catalog.tables.push_back(std::move(table));
    }
    return catalog;
}

}  // namespace nrep
