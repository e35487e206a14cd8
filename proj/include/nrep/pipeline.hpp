#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nrep/config.hpp"
#include "nrep/dataset.hpp"
#include "nrep/selection.hpp"

namespace nrep {

class GoldExecutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// 1 iff both queries run and their normalized result multisets match. A
// failing prediction scores 0; a failing gold query throws GoldExecutionError.
int execution_accuracy(std::string_view pred_sql, std::string_view gold_sql, const std::string& db_path,
                       const ExecutionOptions& options = {});

struct CandidateRecord {
    CandidateSpec spec;
    SqlCandidate candidate;
    bool correct = false;
};

enum class ItemStatus { Scored, GoldError, Failed, Unscored };
std::string_view to_string(ItemStatus status);

struct RunRecord {
    std::string question_id;
    std::string db_id;
    std::string question;
    std::optional<std::string> evidence;
    std::string gold_sql;
    std::optional<std::string> difficulty;

    ItemStatus status = ItemStatus::Scored;
    std::string error;
    std::optional<ExecutionResult> gold;
    std::vector<LinkerRun> linker_runs;
    std::vector<CandidateRecord> candidates;
    std::optional<SelectionOutcome> selection;
    // Candidate position plain voting would have picked.
    std::optional<std::size_t> regular_vote_index;
    int ex = 0;
    CostLedger ledger;
    std::int64_t cost_pico = 0;
    std::optional<std::int64_t> wall_ms;

    // True when the pipeline ran for this item (anything but a gold failure).
    bool ran() const { return status != ItemStatus::GoldError; }
    std::int64_t calls() const { return ledger.total().calls; }

    std::string to_json_line() const;
    static RunRecord from_json_line(std::string_view line);
};

std::vector<RunRecord> load_records(const std::string& path);

// Summary aggregate. EX is over scored items; calls, tokens and cost
// are per query over every item the pipeline ran for.
struct Report {
    std::size_t items = 0;
    std::size_t scored = 0;
    std::size_t correct = 0;
    std::size_t gold_errors = 0;
    std::size_t failed = 0;
    std::size_t unscored = 0;
    double ex = 0.0;
    double median_calls = 0.0;
    double mean_calls = 0.0;
    double mean_input_k = 0.0;
    double mean_output_k = 0.0;
    double mean_total_k = 0.0;
    std::int64_t total_cost_pico = 0;
    double mean_cost = 0.0;
    std::size_t escalations = 0;
    std::size_t pairwise_calls = 0;
    std::map<std::string, Tally> by_stage;
    std::map<std::string, Tally> by_model;

    std::string to_text() const;
    std::string to_json() const;
};

Report aggregate(std::span<const RunRecord> records);

// Catalogs are introspected once per database and shared across workers.
class CatalogCache {
public:
    std::shared_ptr<const SchemaCatalog> get(const std::string& db_path);

private:
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const SchemaCatalog>> catalogs_;
};

struct PipelineEnv {
    const PipelineConfig& config;
    Gateway& gateway;
    EmbeddingBackend& embedder;
    const FewShotStore* fewshot_store = nullptr;
    PriceTable prices;
    CatalogCache catalogs;
    bool timing = false;
    // Off for parameter sweeps, which score plain voting only.
    bool run_selection = true;

    PipelineEnv(const PipelineConfig& config, Gateway& gateway, EmbeddingBackend& embedder,
                const FewShotStore* store = nullptr);

    const std::string& generator_prompt() const { return generator_prompt_; }
    const std::string& linking_prompt() const { return linking_prompt_; }
    const std::vector<LinkingExample>& linking_examples() const { return linking_examples_; }
    const std::string& judge_prompt() const { return judge_prompt_; }

private:
    std::string generator_prompt_;
    std::string linking_prompt_;
    std::vector<LinkingExample> linking_examples_;
    std::string judge_prompt_;
};

// link -> generate -> execute -> select -> score for one question. Never
// throws: failures land in the record. An empty gold_sql yields an
// Unscored record.
RunRecord run_item(const BenchmarkItem& item, PipelineEnv& env);

struct BenchmarkResult {
    std::vector<RunRecord> records;
    Report report;
};

// Items are processed by `config.workers` workers; records are written to
// `records_path` (when non-empty) in item order as soon as each is complete.
BenchmarkResult run_benchmark(std::span<const BenchmarkItem> items, PipelineEnv& env,
                              const std::string& records_path = {});

}  // namespace nrep
