#pragma once

#include <span>
#include <string>
#include <vector>

#include "nrep/pipeline.hpp"

namespace nrep {

// Upper bound: share of items with at least one correct candidate among the
// first k. Lower bound: share where all of the first k are correct.
struct BoundsRow {
    std::size_t k = 0;
    double upper = 0.0;
    double lower = 0.0;
};

struct BoundsAnalysis {
    std::size_t items = 0;
    double ex = 0.0;
    std::vector<BoundsRow> rows;  // k = 1..n

    std::string to_text() const;
};

// Over scored items (failed items count as having no correct candidate).
BoundsAnalysis bounds_analysis(std::span<const RunRecord> records);

struct VoteRow {
    std::size_t votes = 0;  // size of the winning group
    std::size_t items = 0;
    double ex = 0.0;          // selection EX in the bucket
    double regular_ex = 0.0;  // plain voting EX in the bucket
    double upper = 0.0;
    double lower = 0.0;
};

// Buckets scored items by the size of their largest vote group, ascending
// over 1..n; counts no item reached get no row.
std::vector<VoteRow> ex_by_vote(std::span<const RunRecord> records);
std::string vote_table_text(std::span<const VoteRow> rows);

}  // namespace nrep
