#ifndef ASRRL_CORE_TRACE_HPP_
#define ASRRL_CORE_TRACE_HPP_

#include <vector>

#include "asrrl/core/action.hpp"
#include "asrrl/core/state.hpp"
#include "asrrl/scoring/score_triple.hpp"

namespace asrrl {

struct EpisodeStep {
  StateVector state;  // state the action was taken in
  Action action;
  ScoreTriple score;  // score of the resulting state
  double fused = 0.0;
  double reward = 0.0;
  bool done = false;

  friend bool operator==(const EpisodeStep&, const EpisodeStep&) = default;
};

struct EpisodeTrace {
  double initial_fused = 0.0;
  std::vector<EpisodeStep> steps;

  double total_reward() const;
  double final_fused() const {
    return steps.empty() ? initial_fused : steps.back().fused;
  }
  // exactly one done flag, on the last step
  bool well_formed() const;

  friend bool operator==(const EpisodeTrace&, const EpisodeTrace&) = default;
};

}  // namespace asrrl

#endif  // ASRRL_CORE_TRACE_HPP_
