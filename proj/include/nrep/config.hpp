#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "nrep/cost.hpp"
#include "nrep/generation.hpp"
#include "nrep/linking.hpp"
#include "nrep/selection.hpp"

namespace nrep {

struct PromptPaths {
    std::string generator_system;
    std::string linking_system;
    std::string linking_fewshots;
    std::string judge;
};

// Everything a benchmark run needs besides the dataset and the backends.
// Loaded from a single JSON document; unknown fields are rejected.
struct PipelineConfig {
    std::vector<LinkerRunSpec> linker_runs;
    std::vector<CandidateSpec> candidates;
    std::string generator_model = "gemini-1.5-flash";
    std::string judge_model = "gemini-1.5-flash";
    std::string embedding_model = "mock";
    std::size_t fewshot_k = 3;
    std::string fewshot_store;
    PromptPaths prompts;
    std::chrono::milliseconds timeout{30'000};
    std::size_t max_in_flight = 8;
    std::size_t workers = 1;
    int float_precision = 6;
    std::string price_table;
    ConfidenceRules confidence_rules;

    // The built-in default (three linker runs, five candidates).
    static PipelineConfig defaults();
    static PipelineConfig from_json(std::string_view text);
    static PipelineConfig load(const std::string& path);
    std::string to_json() const;

    // Throws ConfigError on the first problem found.
    void validate() const;

    const LinkerRunSpec* find_linker_run(const std::string& id) const;
    PriceTable prices() const;
    std::string generator_system_prompt() const;
    std::string linking_system_prompt() const;
    std::vector<LinkingExample> linking_examples() const;
    std::string judge_prompt() const;
};

}  // namespace nrep
