#include "nrep/assets.hpp"

#include <array>
#include <stdexcept>
#include <utility>

#include "nrep/text.hpp"

namespace nrep {

namespace detail {
extern const std::array<std::pair<std::string_view, std::string_view>, 6> kEmbeddedAssets;
}

std::string_view asset(std::string_view name) {
    for (const auto& [key, body] : detail::kEmbeddedAssets) {
        if (key == name) return body;
    }
    throw std::out_of_range("unknown asset: " + std::string(name));
}

std::string asset_or_file(std::string_view name, const std::string& override_path) {
    if (!override_path.empty()) return read_file(override_path);
    return std::string(asset(name));
}

}  // namespace nrep
