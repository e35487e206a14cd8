#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace nrep {

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);
bool iequals(std::string_view a, std::string_view b);
bool starts_with_icase(std::string_view text, std::string_view prefix);

// Joins with `sep`, no trailing separator.
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Strips trailing spaces/tabs from every line and ends the text with exactly
// one newline (an empty text stays empty). Golden comparisons use this.
std::string canonicalize_layout(std::string_view text);

// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

// Python repr() of a str: single quotes unless the text contains a single
// quote and no double quote.
std::string python_str_repr(std::string_view text);

bool is_plain_identifier(std::string_view name);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace nrep
