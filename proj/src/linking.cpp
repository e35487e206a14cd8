#include "nrep/linking.hpp"

#include <json.hpp>
#include <sqlite3.h>

#include <algorithm>

#include "nrep/assets.hpp"
#include "nrep/log.hpp"
#include "nrep/sqlite_db.hpp"
#include "nrep/text.hpp"

namespace nrep {

using ordered_json = nlohmann::ordered_json;

namespace {

LinkingPrediction prediction_from_json(const ordered_json& object, std::string_view text) {
    LinkingPrediction prediction;
    for (const auto& [table, value] : object.items()) {
        if (!value.is_array()) {
            throw LinkingParseError(LinkingParseError::Kind::MalformedMapping,
                                    "columns for table '" + table + "' are not a list", std::string(text));
        }
        auto existing = std::find_if(prediction.selection.begin(), prediction.selection.end(),
                                     [&](const auto& entry) { return iequals(entry.first, table); });
        if (existing == prediction.selection.end()) {
            prediction.selection.emplace_back(table, std::vector<std::string>{});
            existing = std::prev(prediction.selection.end());
        }
        auto& columns = existing->second;
        for (const auto& item : value) {
            std::string column;
            if (item.is_string()) {
                column = item.get<std::string>();
            } else if (item.is_number()) {
                column = item.dump();
            } else {
                throw LinkingParseError(LinkingParseError::Kind::MalformedMapping,
                                        "column entry for table '" + table + "' is not a string", std::string(text));
            }
            if (std::none_of(columns.begin(), columns.end(), [&](const std::string& c) { return iequals(c, column); })) {
                columns.push_back(std::move(column));
            }
        }
    }
    return prediction;
}

// End of the brace-balanced object starting at `open`, skipping braces inside
// JSON strings; npos when unbalanced.
size_t matching_brace(std::string_view text, size_t open) {
    int depth = 0;
    bool in_string = false;
    for (size_t i = open; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i;
        }
    }
    return std::string_view::npos;
}

double ratio(std::int64_t num, std::int64_t den) { return den == 0 ? 1.0 : static_cast<double>(num) / den; }

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

struct AuthorizerState {
    std::vector<std::pair<std::string, std::string>> reads;
};

int collect_reads(void* user, int action, const char* table, const char* column, const char* database, const char*) {
    if (action == SQLITE_READ && table && (!database || std::string_view(database) == "main")) {
        static_cast<AuthorizerState*>(user)->reads.emplace_back(table, column ? column : "");
    }
    return SQLITE_OK;
}

}  // namespace

std::vector<LinkingExample> parse_linking_examples(std::string_view json_text) {
    const auto root = ordered_json::parse(json_text);
    std::vector<LinkingExample> out;
    for (const auto& item : root) {
        LinkingExample example;
        example.schema_text = item.at("schema_text").get<std::string>();
        example.question = item.at("question").get<std::string>();
        if (item.contains("hint") && item["hint"].is_string()) example.hint = item["hint"].get<std::string>();
        example.answer = prediction_from_json(item.at("answer"), json_text);
        out.push_back(std::move(example));
    }
    return out;
}

std::vector<LinkingExample> default_linking_examples() { return parse_linking_examples(asset("linking_fewshots.json")); }

std::string format_question_turn(std::string_view schema_text, std::string_view nlq,
                                 const std::optional<std::string>& hint) {
    std::string out = "Database schema:\n";
    out += schema_text;
    if (out.back() != '\n') out += "\n";
    out += "\nQuestion: ";
    out += nlq;
    if (hint && !trim(*hint).empty()) {
        out += "\nHint: ";
        out += *hint;
    }
    return out;
}

std::vector<ChatMessage> build_linking_prompt(std::string_view schema_text, std::string_view nlq,
                                              const std::optional<std::string>& hint,
                                              std::span<const LinkingExample> fewshots,
                                              std::string_view system_prompt) {
    if (fewshots.size() != 3) {
        throw std::invalid_argument("schema linking expects exactly 3 few-shot examples, got " +
                                    std::to_string(fewshots.size()));
    }
    std::vector<ChatMessage> messages;
    messages.push_back({"system", std::string(system_prompt.empty() ? asset("linking_system_prompt.txt") : system_prompt)});
    for (const auto& example : fewshots) {
        messages.push_back({"user", format_question_turn(example.schema_text, example.question, example.hint)});
        messages.push_back({"assistant", serialize_prediction(example.answer)});
    }
    messages.push_back({"user", format_question_turn(schema_text, nlq, hint)});
    return messages;
}

LinkingPrediction parse_linking_response(std::string_view text) {
    size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string_view::npos) {
        const size_t close = matching_brace(text, pos);
        if (close == std::string_view::npos) break;
        ordered_json parsed = ordered_json::parse(text.substr(pos, close - pos + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) {
            return prediction_from_json(parsed, text);
        }
        ++pos;
    }
    throw LinkingParseError(LinkingParseError::Kind::NoJsonFound, "no JSON object in linker reply", std::string(text));
}

std::string serialize_prediction(const LinkingPrediction& prediction) {
    ordered_json object = ordered_json::object();
    for (const auto& [table, columns] : prediction.selection) object[table] = columns;
    return object.dump();
}

std::map<FilterLevel, SchemaCatalog> expand_to_levels(const LinkingPrediction& prediction, const SchemaCatalog& catalog) {
    std::map<FilterLevel, SchemaCatalog> out;
    for (auto level : kAllFilterLevels) out.emplace(level, apply_filter(catalog, prediction, level));
    return out;
}

GoldLinking to_gold_sets(const LinkingPrediction& prediction) {
    GoldLinking sets;
    for (const auto& [table, columns] : prediction.selection) {
        const std::string t = to_lower(table);
        sets.tables.insert(t);
        for (const auto& column : columns) sets.columns.emplace(t, to_lower(column));
    }
    return sets;
}

GoldLinking derive_gold_linking(std::string_view gold_sql, const SchemaCatalog& catalog) {
    Database db("", Database::Mode::Memory);
    for (const auto& table : catalog.tables) {
        std::vector<std::string> columns;
        for (const auto& column : table.columns) columns.push_back(quote_identifier(column.name));
        if (columns.empty()) columns.push_back(quote_identifier("_placeholder_"));
        db.exec("CREATE TABLE " + quote_identifier(table.name) + " (" + join(columns, ", ") + ")");
    }

    AuthorizerState state;
    sqlite3_set_authorizer(db.handle(), &collect_reads, &state);
    try {
        Statement stmt = db.prepare(gold_sql);
    } catch (const SqliteError& e) {
        sqlite3_set_authorizer(db.handle(), nullptr, nullptr);
        throw GoldLinkingError("cannot resolve gold SQL against '" + catalog.db_id + "': " + e.what());
    }
    sqlite3_set_authorizer(db.handle(), nullptr, nullptr);

    GoldLinking gold;
    for (const auto& [table_name, column_name] : state.reads) {
        const TableDef* table = catalog.find_table(table_name);
        if (!table) continue;
        const std::string t = to_lower(table->name);
        gold.tables.insert(t);
        if (column_name.empty()) continue;
        if (const ColumnDef* column = table->find_column(column_name)) gold.columns.emplace(t, to_lower(column->name));
    }
    return gold;
}

LinkingMetrics metrics_from_counts(const LinkingCounts& tables, const LinkingCounts& columns) {
    LinkingMetrics m;
    m.table_counts = tables;
    m.column_counts = columns;
    m.table_precision = ratio(tables.tp, tables.tp + tables.fp);
    m.table_recall = ratio(tables.tp, tables.tp + tables.fn);
    m.table_f1 = harmonic(m.table_precision, m.table_recall);
    m.column_precision = ratio(columns.tp, columns.tp + columns.fp);
    m.column_recall = ratio(columns.tp, columns.tp + columns.fn);
    m.column_f1 = harmonic(m.column_precision, m.column_recall);
    return m;
}

LinkingMetrics linking_metrics(std::span<const LinkingPrediction> predictions, std::span<const GoldLinking> golds) {
    if (predictions.size() != golds.size()) {
        throw std::invalid_argument("linking_metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                                    std::to_string(golds.size()) + " gold sets");
    }
    LinkingCounts tables, columns;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const GoldLinking predicted = to_gold_sets(predictions[i]);
        const GoldLinking& gold = golds[i];
        for (const auto& t : predicted.tables) (gold.tables.count(t) ? tables.tp : tables.fp) += 1;
        for (const auto& t : gold.tables) {
            if (!predicted.tables.count(t)) tables.fn += 1;
        }
        for (const auto& c : predicted.columns) (gold.columns.count(c) ? columns.tp : columns.fp) += 1;
        for (const auto& c : gold.columns) {
            if (!predicted.columns.count(c)) columns.fn += 1;
        }
    }
    return metrics_from_counts(tables, columns);
}

LinkerRun run_linker(const LinkerRunSpec& spec, const SchemaCatalog& catalog, const LinkingContext& context,
                     Gateway& gateway, CostLedger& ledger) {
    LinkerRun run;
    run.id = spec.id;
    run.format = spec.format;
    run.model_id = spec.model_id;
    ChatRequest request;
    request.model_id = spec.model_id;
    request.messages = build_linking_prompt(render(catalog, spec.format), context.nlq, context.hint, context.fewshots,
                                            context.system_prompt);
    try {
        ChatResponse response = gateway.complete(request, Stage::Linking, ledger);
        run.usage = response.usage;
        run.raw_response = response.text;
        run.prediction = parse_linking_response(response.text);
        run.prediction.source = spec.id;
        run.ok = true;
    } catch (const LinkingParseError& e) {
        run.error = e.what();
        log_warn("linker run " + spec.id + ": " + run.error + "; falling back to the unfiltered schema");
    } catch (const BackendError& e) {
        run.error = e.what();
        log_warn("linker run " + spec.id + " failed: " + run.error + "; falling back to the unfiltered schema");
    }
    return run;
}

SchemaCatalog filtered_catalog(const SchemaCatalog& catalog, const LinkerRun* run, FilterLevel level) {
    if (level == FilterLevel::NoFiltering || !run || !run->ok) return catalog;
    return apply_filter(catalog, run->prediction, level);
}

}  // namespace nrep

namespace nrep {

LinkingPrediction gold_as_prediction(const GoldLinking& gold, const SchemaCatalog& catalog, LinkerRunId source) {
    LinkingPrediction prediction;
    prediction.source = std::move(source);
    for (const auto& table : catalog.tables) {
        const std::string table_key = to_lower(table.name);
        if (!gold.tables.count(table_key)) continue;
        std::vector<std::string> columns;
        for (const auto& column : table.columns) {
            if (gold.columns.count({table_key, to_lower(column.name)})) columns.push_back(column.name);
        }
        prediction.selection.emplace_back(table.name, std::move(columns));
    }
    return prediction;
}

}  // namespace nrep
