#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace toolmeta::text {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);

/// Whole-field parses; throw std::invalid_argument on trailing garbage.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

}  // namespace toolmeta::text
