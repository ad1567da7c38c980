#ifndef ASRRL_ENV_ORACLE_HPP_
#define ASRRL_ENV_ORACLE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "asrrl/core/types.hpp"
#include "asrrl/env/environment.hpp"

namespace asrrl::env {

inline constexpr std::uint64_t kMaxGridPoints = 10'000'000;

// Axis-aligned grid: axis i holds the points lo_i, lo_i + step, ..., <= hi_i.
struct GridSpec {
  std::vector<double> lo;
  std::vector<double> hi;
  double step = 0.01;

  static GridSpec cube(std::size_t dim, double lo, double hi, double step);
  // hypercube of half-width `radius` around `center`
  static GridSpec around(const Embedding& center, double radius, double step);

  std::size_t dim() const { return lo.size(); }
  std::size_t points_on_axis(std::size_t axis) const;
  // saturates at UINT64_MAX
  std::uint64_t size() const;
};

struct OracleResult {
  Embedding embedding;
  double fused = 0.0;
  std::uint64_t points = 0;
};

// Exhaustive argmax of `objective` over the grid. Points are visited in
// lexicographic order and only a strictly better value replaces the
// incumbent, so ties resolve to the lexicographically smallest embedding.
// Rejects empty grids and grids above kMaxGridPoints.
OracleResult oracle_best(const GridSpec& grid,
                         const std::function<double(const Embedding&)>& objective);

OracleResult oracle_best(const Environment& env, const SpeakerProfile& profile,
                         const TextFeatures& text, const GridSpec& grid);

// Upper bound on how far the fused score can rise between a grid point and
// any off-grid point in its cell: L * (step / 2) * sqrt(d). The similarity
// Lipschitz constant is 0.5 * ||V|| * ||W2|| / min ||voiceprint||, where the
// minimum is taken over the grid.
double grid_resolution_slack(const VoiceModel& model,
                             const scoring::RewardWeights& weights,
                             const GridSpec& grid,
                             double min_voiceprint_norm);

double min_voiceprint_norm(const VoiceModel& model, const TextFeatures& text,
                           const GridSpec& grid);

}  // namespace asrrl::env

#endif  // ASRRL_ENV_ORACLE_HPP_
