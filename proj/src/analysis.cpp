#include "nrep/analysis.hpp"

#include <algorithm>
#include <cstdio>

namespace nrep {

namespace {

bool counts_for_ex(const RunRecord& r) { return r.status == ItemStatus::Scored || r.status == ItemStatus::Failed; }

bool any_correct(const RunRecord& r, std::size_t k) {
    const std::size_t m = std::min(k, r.candidates.size());
    for (std::size_t i = 0; i < m; ++i) {
        if (r.candidates[i].correct) return true;
    }
    return false;
}

bool all_correct(const RunRecord& r, std::size_t k) {
    const std::size_t m = std::min(k, r.candidates.size());
    if (m == 0) return false;
    for (std::size_t i = 0; i < m; ++i) {
        if (!r.candidates[i].correct) return false;
    }
    return true;
}

bool regular_vote_correct(const RunRecord& r) {
    return r.regular_vote_index && *r.regular_vote_index < r.candidates.size() &&
           r.candidates[*r.regular_vote_index].correct;
}

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

std::string pct(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value * 100.0);
    return buf;
}

}  // namespace

BoundsAnalysis bounds_analysis(std::span<const RunRecord> records) {
    BoundsAnalysis out;
    std::size_t n = 0;
    std::size_t correct = 0;
    for (const auto& r : records) {
        if (!counts_for_ex(r)) continue;
        ++out.items;
        correct += r.ex == 1 ? 1 : 0;
        n = std::max(n, r.candidates.size());
    }
    out.ex = ratio(correct, out.items);
    for (std::size_t k = 1; k <= n; ++k) {
        std::size_t upper = 0;
        std::size_t lower = 0;
        for (const auto& r : records) {
            if (!counts_for_ex(r)) continue;
            upper += any_correct(r, k) ? 1 : 0;
            lower += all_correct(r, k) ? 1 : 0;
        }
        out.rows.push_back({k, ratio(upper, out.items), ratio(lower, out.items)});
    }
    return out;
}

std::string BoundsAnalysis::to_text() const {
    std::string out = "candidates  upper   lower   (items " + std::to_string(items) + ", EX " + pct(ex) + ")\n";
    for (const auto& row : rows) {
        char line[96];
        std::snprintf(line, sizeof(line), "%-11zu %-7s %s\n", row.k, pct(row.upper).c_str(), pct(row.lower).c_str());
        out += line;
    }
    return out;
}

std::vector<VoteRow> ex_by_vote(std::span<const RunRecord> records) {
    std::size_t n = 0;
    for (const auto& r : records) {
        if (counts_for_ex(r)) n = std::max(n, r.candidates.size());
    }
    struct Counts {
        std::size_t items = 0, ex = 0, regular = 0, upper = 0, lower = 0;
    };
    std::vector<Counts> buckets(n + 1);
    for (const auto& r : records) {
        if (!counts_for_ex(r) || !r.selection || r.selection->distribution.empty()) continue;
        const std::size_t votes = r.selection->distribution.front();
        if (votes > n) continue;
        Counts& c = buckets[votes];
        ++c.items;
        c.ex += r.ex == 1 ? 1 : 0;
        c.regular += regular_vote_correct(r) ? 1 : 0;
        c.upper += any_correct(r, r.candidates.size()) ? 1 : 0;
        c.lower += all_correct(r, r.candidates.size()) ? 1 : 0;
    }
    std::vector<VoteRow> rows;
    for (std::size_t votes = 1; votes <= n; ++votes) {
        const Counts& c = buckets[votes];
        if (c.items == 0) continue;
        rows.push_back({votes, c.items, ratio(c.ex, c.items), ratio(c.regular, c.items), ratio(c.upper, c.items),
                        ratio(c.lower, c.items)});
    }
    return rows;
}

std::string vote_table_text(std::span<const VoteRow> rows) {
    std::string out = "votes  items  EX      regular  upper   lower\n";
    for (const auto& row : rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-6zu %-6zu %-7s %-8s %-7s %s\n", row.votes, row.items, pct(row.ex).c_str(),
                      pct(row.regular_ex).c_str(), pct(row.upper).c_str(), pct(row.lower).c_str());
        out += line;
    }
    return out;
}

}  // namespace nrep
