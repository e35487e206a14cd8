#pragma once

#include <string>
#include <string_view>

namespace nrep {

// Built-in asset by file name (e.g. "judge_prompt.txt"); throws if unknown.
std::string_view asset(std::string_view name);

// Contents of `override_path` when non-empty, else the built-in asset.
std::string asset_or_file(std::string_view name, const std::string& override_path);

}  // namespace nrep
