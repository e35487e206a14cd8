#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nrep/sqlite_db.hpp"

namespace nrep {

enum class ExecStatus { Ok, Error, Timeout };
std::string_view to_string(ExecStatus status);

struct ExecutionResult {
    ExecStatus status = ExecStatus::Error;
    std::string signature;        // Ok only
    std::int64_t row_count = 0;   // Ok only
    std::string error_text;       // Error only
    std::int64_t timeout_ms = 0;  // the limit that was hit, Timeout only
    // First rows rendered for the pairwise judge; not part of equivalence.
    std::string preview;

    bool operator==(const ExecutionResult&) const = default;
};

struct ExecutionOptions {
    std::chrono::milliseconds timeout{30'000};
    int float_precision = 6;
    std::size_t preview_rows = 5;
};

// Canonical digest of a result multiset: cells canonicalized (integral
// numbers unified, other reals rounded to `float_precision` decimals, text
// compared bytewise, NULL distinct from ''), rows sorted, then hashed.
std::string normalize_result(std::span<const SqlRow> rows, int float_precision = 6);

// Canonical per-row keys before sorting/hashing; exposed for tests.
std::string canonical_row(const SqlRow& row, int float_precision = 6);

// Runs the SQL on a read-only connection of its own. Failures are reported
// in the result and never thrown.
ExecutionResult execute_candidate(std::string_view sql, const std::string& db_path,
                                  const ExecutionOptions& options = {});

}  // namespace nrep
