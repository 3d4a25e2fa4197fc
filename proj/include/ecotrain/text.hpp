#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the CSV and protocol readers.
namespace ecotrain {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Splits on '\n', dropping a trailing '\r' from each line. A final empty
/// line after a terminating newline is not reported.
std::vector<std::string_view> split_lines(std::string_view s);

std::optional<std::int64_t> parse_int(std::string_view s);
std::optional<double> parse_double(std::string_view s);

/// Shortest representation that round-trips through parse_double.
std::string format_double(double v);

/// Scientific notation with `digits` significant digits and an unpadded
/// exponent, e.g. 1.02e-5.
std::string format_scientific(double v, int digits = 3);

/// Fixed-point with `decimals` places.
std::string format_fixed(double v, int decimals);

}  // namespace ecotrain
