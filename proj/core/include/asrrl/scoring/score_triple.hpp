#ifndef ASRRL_SCORING_SCORE_TRIPLE_HPP_
#define ASRRL_SCORING_SCORE_TRIPLE_HPP_

namespace asrrl {

// sim in [0,1] (higher is better), mos in [0,5] (higher is better),
// intell in [0,1] (lower is better, a word-error-rate analogue)
struct ScoreTriple {
  double sim = 0.0;
  double mos = 0.0;
  double intell = 0.0;

  friend bool operator==(const ScoreTriple&, const ScoreTriple&) = default;
};

inline constexpr double kMaxMos = 5.0;

}  // namespace asrrl

#endif  // ASRRL_SCORING_SCORE_TRIPLE_HPP_
