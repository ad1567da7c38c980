#ifndef ASRRL_SCORING_FUSION_HPP_
#define ASRRL_SCORING_FUSION_HPP_

#include "asrrl/core/config.hpp"
#include "asrrl/scoring/score_triple.hpp"

namespace asrrl::scoring {

struct RewardWeights {
  double lambda1 = 0.5;
  double lambda2 = 0.1;
  bool enable_mos = true;
  bool enable_intell = true;

  static RewardWeights from_config(const RLConfig& config) {
    return {config.lambda1, config.lambda2, config.enable_mos,
            config.enable_intell};
  }
};

// Throws ScoreRangeError when a component is outside its declared range or
// not finite.
void validate(const ScoreTriple& triple);

// sc = sim + lambda1 * mos / 5 - lambda2 * intell, with disabled terms
// contributing exactly zero.
double fuse_scores(const ScoreTriple& triple, const RewardWeights& weights);

// r_n = sc_n - sc_{n-1}
double step_reward(double current, double previous);

}  // namespace asrrl::scoring

#endif  // ASRRL_SCORING_FUSION_HPP_
