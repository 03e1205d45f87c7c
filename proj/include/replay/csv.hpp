#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace replay {

// Splits one CSV line on commas (no quoting), trimming surrounding spaces
// and a trailing carriage return.
std::vector<std::string> split_csv_line(std::string_view line);

// Strict decimal parse; false on trailing garbage or empty input.
bool parse_double(std::string_view text, double& out);

// printf("%.17g").
std::string format_double(double x);

}  // namespace replay
