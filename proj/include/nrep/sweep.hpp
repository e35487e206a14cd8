#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nrep/pipeline.hpp"

namespace nrep {

class SweepLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SweepOptions {
    std::vector<RepresentationFormat> formats;
    std::vector<FilterLevel> levels{kAllFilterLevels[0], kAllFilterLevels[1], kAllFilterLevels[2]};
    std::size_t n = 1;
    std::string linker_model = "gpt-4o";
    std::string generator_model = "gemini-1.5-flash";
    // Combination explosion guard; raise explicitly to go past it.
    std::size_t max_configs = 1000;
};

// Multisets of size n over u distinct items: C(u + n - 1, n).
std::uint64_t multiset_count(std::size_t u, std::size_t n);

// All non-decreasing index tuples of length n over 0..u-1, lexicographic.
std::vector<std::vector<std::size_t>> enumerate_multisets(std::size_t u, std::size_t n);

// The distinct (format, level) specs of a sweep, formats outermost.
std::vector<CandidateSpec> sweep_specs(const SweepOptions& options);

struct SweepEntry {
    std::vector<std::size_t> members;  // indices into SweepResult::specs
    std::size_t correct = 0;
    std::size_t items = 0;
    double ex = 0.0;

    std::string label(std::span<const CandidateSpec> specs) const;
};

struct SweepResult {
    std::vector<CandidateSpec> specs;
    std::vector<SweepEntry> ranked;  // EX descending, ties in enumeration order
    std::vector<RunRecord> records;  // one per item, one candidate per spec

    std::string to_text(std::size_t top = 20) const;
};

// Scores every multiset with plain voting on candidates generated once per
// distinct spec and item. Throws SweepLimitError past options.max_configs.
SweepResult sweep(std::span<const BenchmarkItem> items, const PipelineConfig& base, const SweepOptions& options,
                  Gateway& gateway, EmbeddingBackend& embedder, const FewShotStore* store);

// Deterministic subset: ceil(fraction * size) items drawn with the seed,
// returned in dataset order.
std::vector<BenchmarkItem> sample_subset(std::span<const BenchmarkItem> items, double fraction, std::uint64_t seed);

}  // namespace nrep
