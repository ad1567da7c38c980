#include "asrrl/core/types.hpp"

#include <algorithm>
#include <string>

#include "asrrl/core/error.hpp"

namespace asrrl {

std::string_view to_string(Scenario scenario) {
  return scenario == Scenario::single_sentence ? "ss" : "fs";
}

Scenario parse_scenario(std::string_view text) {
  if (text == "ss" || text == "SS") return Scenario::single_sentence;
  if (text == "fs" || text == "FS") return Scenario::few_sentence;
  throw ConfigError("unknown scenario '" + std::string(text) +
                    "' (expected ss or fs)");
}

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

double linf_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("linf_distance: length " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

}  // namespace asrrl
