#ifndef ASRRL_CORE_NUMERIC_TEXT_HPP_
#define ASRRL_CORE_NUMERIC_TEXT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asrrl {

// Shortest decimal that parses back to the same double.
std::string format_double(double value);
// comma-joined shortest round-trip decimals
std::string format_doubles(std::span<const double> values, char sep = ',');

// Strict parsers: the whole string must be consumed. Throw ConfigError
// mentioning `what`.
double parse_double(std::string_view text, std::string_view what = "value");
std::int64_t parse_int(std::string_view text, std::string_view what = "value");
std::uint64_t parse_u64(std::string_view text, std::string_view what = "value");
bool parse_bool(std::string_view text, std::string_view what = "value");
std::vector<double> parse_doubles(std::string_view text, char sep = ',',
                                  std::string_view what = "value");

std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

}  // namespace asrrl

#endif  // ASRRL_CORE_NUMERIC_TEXT_HPP_
