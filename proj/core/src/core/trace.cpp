#include "asrrl/core/trace.hpp"

namespace asrrl {

double EpisodeTrace::total_reward() const {
  double total = 0.0;
  for (const auto& step : steps) total += step.reward;
  return total;
}

bool EpisodeTrace::well_formed() const {
  if (steps.empty()) return false;
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    if (steps[i].done) return false;
  }
  return steps.back().done;
}

}  // namespace asrrl
