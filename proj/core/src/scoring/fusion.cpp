#include "asrrl/scoring/fusion.hpp"

#include <cmath>
#include <string>

#include "asrrl/core/error.hpp"
#include "asrrl/core/numeric_text.hpp"

namespace asrrl::scoring {

namespace {

void check_component(double value, double lo, double hi, const char* name) {
  if (!std::isfinite(value) || value < lo || value > hi) {
    throw ScoreRangeError(std::string("score component ") + name + " = " +
                          format_double(value) + " outside [" +
                          format_double(lo) + ", " + format_double(hi) + "]");
  }
}

}  // namespace

void validate(const ScoreTriple& triple) {
  check_component(triple.sim, 0.0, 1.0, "sim");
  check_component(triple.mos, 0.0, kMaxMos, "mos");
  check_component(triple.intell, 0.0, 1.0, "intell");
}

double fuse_scores(const ScoreTriple& triple, const RewardWeights& weights) {
  validate(triple);
  double sc = triple.sim;
  if (weights.enable_mos) sc += weights.lambda1 * (triple.mos / kMaxMos);
  if (weights.enable_intell) sc -= weights.lambda2 * triple.intell;
  return sc;
}

double step_reward(double current, double previous) {
  if (!std::isfinite(current) || !std::isfinite(previous)) {
    throw NumericalError("step_reward: non-finite score");
  }
  return current - previous;
}

}  // namespace asrrl::scoring
