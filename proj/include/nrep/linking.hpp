#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nrep/catalog.hpp"
#include "nrep/gateway.hpp"
#include "nrep/prediction.hpp"
#include "nrep/representation.hpp"

namespace nrep {

struct LinkingExample {
    std::string schema_text;
    std::string question;
    std::optional<std::string> hint;
    LinkingPrediction answer;
};

// The three built-in linking few-shots.
std::vector<LinkingExample> default_linking_examples();
std::vector<LinkingExample> parse_linking_examples(std::string_view json_text);

// User turn shared by linking and generation prompts.
std::string format_question_turn(std::string_view schema_text, std::string_view nlq,
                                 const std::optional<std::string>& hint);

// System instruction, the three few-shots as user/assistant pairs, then the
// schema and question. Throws std::invalid_argument unless exactly 3 few-shots.
std::vector<ChatMessage> build_linking_prompt(std::string_view schema_text, std::string_view nlq,
                                              const std::optional<std::string>& hint,
                                              std::span<const LinkingExample> fewshots,
                                              std::string_view system_prompt = {});

class LinkingParseError : public std::runtime_error {
public:
    enum class Kind { NoJsonFound, MalformedMapping };
    LinkingParseError(Kind kind, const std::string& message, std::string text)
        : std::runtime_error(message), kind_(kind), text_(std::move(text)) {}
    Kind kind() const { return kind_; }
    const std::string& text() const { return text_; }

private:
    Kind kind_;
    std::string text_;
};

// Extracts the first JSON object in the reply (bare or fenced).
LinkingPrediction parse_linking_response(std::string_view text);
std::string serialize_prediction(const LinkingPrediction& prediction);

std::map<FilterLevel, SchemaCatalog> expand_to_levels(const LinkingPrediction& prediction, const SchemaCatalog& catalog);

// Lower-cased gold table names and (table, column) pairs.
struct GoldLinking {
    std::set<std::string> tables;
    std::set<std::pair<std::string, std::string>> columns;

    bool operator==(const GoldLinking&) const = default;
};

GoldLinking to_gold_sets(const LinkingPrediction& prediction);

class GoldLinkingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Resolves every table/column the SQL reads against the catalog schema, using
// SQLite's own name resolution (aliases, SELECT *, subqueries). Throws
// GoldLinkingError when the SQL does not compile against the schema.
GoldLinking derive_gold_linking(std::string_view gold_sql, const SchemaCatalog& catalog);

// Gold sets as a prediction in catalog order and catalog spelling.
LinkingPrediction gold_as_prediction(const GoldLinking& gold, const SchemaCatalog& catalog, LinkerRunId source = "gold");

struct LinkingCounts {
    std::int64_t tp = 0, fp = 0, fn = 0;
    LinkingCounts& operator+=(const LinkingCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
};

struct LinkingMetrics {
    double table_precision = 0, table_recall = 0, table_f1 = 0;
    double column_precision = 0, column_recall = 0, column_f1 = 0;
    LinkingCounts table_counts, column_counts;
};

// Micro-averaged over the question list; 0/0 ratios count as 1.
LinkingMetrics linking_metrics(std::span<const LinkingPrediction> predictions, std::span<const GoldLinking> golds);
LinkingMetrics metrics_from_counts(const LinkingCounts& tables, const LinkingCounts& columns);

struct LinkerRunSpec {
    LinkerRunId id;
    RepresentationFormat format = RepresentationFormat::MSchema;
    std::string model_id;
};

struct LinkerRun {
    LinkerRunId id;
    RepresentationFormat format = RepresentationFormat::MSchema;
    std::string model_id;
    LinkingPrediction prediction;
    TokenUsage usage;
    // False when the call or the parse failed; downstream filtering then
    // falls back to the unfiltered schema.
    bool ok = false;
    std::string error;
    std::string raw_response;
};

struct LinkingContext {
    std::string nlq;
    std::optional<std::string> hint;
    std::span<const LinkingExample> fewshots;
    std::string_view system_prompt;
    std::string_view stage_label = "linking";
};

// One linker call: renders the unfiltered catalog in the run's format, asks
// the model, parses the reply. Never throws for backend or parse failures.
LinkerRun run_linker(const LinkerRunSpec& spec, const SchemaCatalog& catalog, const LinkingContext& context,
                     Gateway& gateway, CostLedger& ledger);

// Catalog used by a candidate: NoFiltering, or a failed linker run, yields
// the input catalog.
SchemaCatalog filtered_catalog(const SchemaCatalog& catalog, const LinkerRun* run, FilterLevel level);

}  // namespace nrep
