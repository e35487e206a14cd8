#pragma once

#include <string>
#include <utility>
#include <vector>

namespace nrep {

using LinkerRunId = std::string;

// Tables and columns a linker judged relevant to one question, in the order
// the linker reported them. Keys and per-table columns are unique.
struct LinkingPrediction {
    std::vector<std::pair<std::string, std::vector<std::string>>> selection;
    LinkerRunId source;

    bool empty() const { return selection.empty(); }
    bool operator==(const LinkingPrediction&) const = default;
};

}  // namespace nrep
