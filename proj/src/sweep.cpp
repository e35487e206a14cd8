#include "nrep/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace nrep {

std::uint64_t multiset_count(std::size_t u, std::size_t n) {
    if (u == 0) return n == 0 ? 1 : 0;
    // C(u + n - 1, n), built incrementally so every step stays integral.
    std::uint64_t result = 1;
    for (std::size_t i = 1; i <= n; ++i) {
        result = result * (u - 1 + i) / i;
    }
    return result;
}

std::vector<std::vector<std::size_t>> enumerate_multisets(std::size_t u, std::size_t n) {
    std::vector<std::vector<std::size_t>> out;
    if (n == 0) {
        out.emplace_back();
        return out;
    }
    if (u == 0) return out;
    std::vector<std::size_t> current(n, 0);
    while (true) {
        out.push_back(current);
        std::size_t pos = n;
        while (pos > 0 && current[pos - 1] == u - 1) --pos;
        if (pos == 0) break;
        const std::size_t value = current[pos - 1] + 1;
        std::fill(current.begin() + static_cast<std::ptrdiff_t>(pos - 1), current.end(), value);
    }
    return out;
}

std::vector<CandidateSpec> sweep_specs(const SweepOptions& options) {
    std::vector<CandidateSpec> specs;
    for (auto format : options.formats) {
        for (auto level : options.levels) {
            CandidateSpec spec;
            spec.spec_index = specs.size();
            spec.format = format;
            spec.filter_level = level;
            if (level != FilterLevel::NoFiltering) spec.linker_run = std::string(to_string(format)) + "-linker";
            spec.generator_model = options.generator_model;
            specs.push_back(spec);
        }
    }
    return specs;
}

std::string SweepEntry::label(std::span<const CandidateSpec> specs) const {
    std::string out;
    for (std::size_t i = 0; i < members.size(); ++i) {
        const auto& spec = specs[members[i]];
        if (i > 0) out += " + ";
        out += std::string(to_string(spec.format)) + "/" + std::string(to_string(spec.filter_level));
    }
    return out;
}

SweepResult sweep(std::span<const BenchmarkItem> items, const PipelineConfig& base, const SweepOptions& options,
                  Gateway& gateway, EmbeddingBackend& embedder, const FewShotStore* store) {
    if (options.formats.empty() || options.levels.empty()) throw std::invalid_argument("sweep needs formats and levels");
    if (options.n == 0) throw std::invalid_argument("sweep candidate count must be positive");
    SweepResult result;
    result.specs = sweep_specs(options);
    const std::uint64_t total = multiset_count(result.specs.size(), options.n);
    if (total > options.max_configs) {
        throw SweepLimitError(std::to_string(total) + " configurations exceed the cap of " +
                              std::to_string(options.max_configs) + "; raise it explicitly to proceed");
    }

    // One pass generates every distinct spec once per item; selection is off.
    PipelineConfig config = base;
    config.linker_runs.clear();
    for (auto format : options.formats) {
        config.linker_runs.push_back({std::string(to_string(format)) + "-linker", format, options.linker_model});
    }
    config.candidates = result.specs;
    PipelineEnv env(config, gateway, embedder, store);
    env.run_selection = false;
    result.records = run_benchmark(items, env).records;

    for (auto& members : enumerate_multisets(result.specs.size(), options.n)) {
        SweepEntry entry;
        entry.members = std::move(members);
        for (const auto& record : result.records) {
            if (record.status != ItemStatus::Scored && record.status != ItemStatus::Failed) continue;
            ++entry.items;
            if (record.candidates.size() != result.specs.size()) continue;
            std::vector<SqlCandidate> pool;
            for (std::size_t m : entry.members) pool.push_back(record.candidates[m].candidate);
            const auto groups = group_votes(std::span<const SqlCandidate>(pool));
            const std::size_t chosen = regular_vote_choice(groups);
            entry.correct += record.candidates[entry.members[chosen]].correct ? 1 : 0;
        }
        entry.ex = entry.items == 0 ? 0.0 : static_cast<double>(entry.correct) / entry.items;
        result.ranked.push_back(std::move(entry));
    }
    std::stable_sort(result.ranked.begin(), result.ranked.end(),
                     [](const SweepEntry& a, const SweepEntry& b) { return a.correct > b.correct; });
    return result;
}

std::string SweepResult::to_text(std::size_t top) const {
    std::string out = "rank  EX      correct  configuration\n";
    for (std::size_t i = 0; i < ranked.size() && i < top; ++i) {
        char line[64];
        std::snprintf(line, sizeof(line), "%-5zu %-7.2f %-8zu ", i + 1, ranked[i].ex * 100.0, ranked[i].correct);
        out += line + ranked[i].label(specs) + "\n";
    }
    out += std::to_string(ranked.size()) + " configurations evaluated\n";
    return out;
}

std::vector<BenchmarkItem> sample_subset(std::span<const BenchmarkItem> items, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must be in (0, 1]");
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto take = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(items.size()) - 1e-9));
    order.resize(std::min(take, order.size()));
    std::sort(order.begin(), order.end());
    std::vector<BenchmarkItem> out;
    for (std::size_t i : order) out.push_back(items[i]);
    return out;
}

}  // namespace nrep
