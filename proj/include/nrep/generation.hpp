#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nrep/catalog.hpp"
#include "nrep/execution.hpp"
#include "nrep/gateway.hpp"
#include "nrep/linking.hpp"
#include "nrep/representation.hpp"

namespace nrep {

// One generation path: which schema rendering, filtered by which linker run.
struct CandidateSpec {
    std::size_t spec_index = 0;
    RepresentationFormat format = RepresentationFormat::MSchema;
    FilterLevel filter_level = FilterLevel::NoFiltering;
    std::optional<LinkerRunId> linker_run;  // absent for NoFiltering
    std::string generator_model;
};

// Throws std::invalid_argument when indices are not 0..n-1 in order, or a
// NoFiltering spec names a linker run, or a filtered spec lacks one.
void validate_specs(std::span<const CandidateSpec> specs);

struct FewShotExample {
    std::string question;
    std::string schema_text;
    std::string sql;
    std::string source_db;
};

// One training pair with its fully-filtered schema in every format and the
// embedding of its question.
struct FewShotRecord {
    std::string question;
    std::string db_id;
    std::string sql;
    std::map<RepresentationFormat, std::string> schema_texts;
    std::vector<double> embedding;

    FewShotExample example(RepresentationFormat format) const;
};

// Line-delimited JSON: {"question", "db_id", "sql", "schema_text": {format: text}, "embedding": [...]}.
class FewShotStore {
public:
    FewShotStore() = default;
    explicit FewShotStore(std::vector<FewShotRecord> records) : records_(std::move(records)) {}

    static FewShotStore load(const std::string& path);
    void save(const std::string& path) const;
    static std::string to_line(const FewShotRecord& record);
    static FewShotRecord from_line(std::string_view line);

    const std::vector<FewShotRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

private:
    std::vector<FewShotRecord> records_;
};

// Indices of the k records most cosine-similar to the query, best first;
// ties keep store order. A store smaller than k returns everything with a
// warning.
std::vector<std::size_t> rank_fewshots(const std::vector<double>& query_embedding, const FewShotStore& store,
                                       std::size_t k);

// Training pair -> store record: the schema is fully filtered to the tables
// and columns the gold SQL reads, rendered in every format.
FewShotRecord make_fewshot_record(std::string question, std::string sql, const SchemaCatalog& catalog,
                                  std::vector<double> embedding);

std::vector<FewShotExample> retrieve_fewshots(std::string_view nlq, const FewShotStore& store, std::size_t k,
                                              EmbeddingBackend& embedder,
                                              RepresentationFormat format = RepresentationFormat::MSchema);

std::string wrap_in_sql_fence(std::string_view sql);

// System prompt (built-in asset unless overridden), few-shots as
// user/assistant pairs, then schema + question (+ hint).
std::vector<ChatMessage> build_generation_prompt(std::string_view schema_text, std::string_view nlq,
                                                 const std::optional<std::string>& hint,
                                                 std::span<const FewShotExample> fewshots,
                                                 std::string_view system_prompt = {});

class NoCodeBlockError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Content of the first ```sql block, or of the first untagged block when no
// block is tagged sql; trimmed.
std::string extract_sql(std::string_view response);

enum class CandidateState { Generated, NoCodeBlock, BackendFailure };

struct SqlCandidate {
    std::size_t spec_index = 0;
    std::string sql;
    std::string raw_response;
    TokenUsage usage;
    CandidateState state = CandidateState::Generated;
    std::string error;
    std::optional<ExecutionResult> execution;
};

struct GenerationContext {
    std::string nlq;
    std::optional<std::string> hint;
    const SchemaCatalog* catalog = nullptr;
    const std::map<LinkerRunId, LinkerRun>* linker_runs = nullptr;
    std::vector<const FewShotRecord*> fewshots;
    std::string system_prompt;  // empty: built-in
    std::size_t max_in_flight = 8;
};

// One call per spec; the result is in spec_index order whatever the call
// completion order. Backend failures become BackendFailure candidates.
std::vector<SqlCandidate> generate_candidates(std::span<const CandidateSpec> specs, const GenerationContext& context,
                                              Gateway& gateway, CostLedger& ledger);

}  // namespace nrep
