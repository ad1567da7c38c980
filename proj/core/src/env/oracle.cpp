#include "asrrl/env/oracle.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "asrrl/core/error.hpp"

namespace asrrl::env {

namespace {

template <class Visit>
void for_each_point(const GridSpec& grid, Visit&& visit) {
  const std::size_t d = grid.dim();
  std::vector<std::size_t> counts(d);
  for (std::size_t a = 0; a < d; ++a) counts[a] = grid.points_on_axis(a);
  std::vector<std::size_t> index(d, 0);
  Embedding point(d);
  while (true) {
    for (std::size_t a = 0; a < d; ++a) {
      point[a] = grid.lo[a] + static_cast<double>(index[a]) * grid.step;
    }
    visit(point);
    // odometer increment, last axis fastest -> lexicographic order
    std::size_t a = d;
    while (a > 0) {
      --a;
      if (++index[a] < counts[a]) break;
      index[a] = 0;
      if (a == 0) return;
    }
  }
}

void check_grid(const GridSpec& grid) {
  if (grid.dim() == 0 || grid.hi.size() != grid.lo.size()) {
    throw ConfigError("oracle grid: empty or inconsistent bounds");
  }
  if (!(grid.step > 0.0)) throw ConfigError("oracle grid: step must be > 0");
  const std::uint64_t size = grid.size();
  if (size == 0) throw ConfigError("oracle grid is empty");
  if (size > kMaxGridPoints) {
    throw ConfigError("oracle grid has " + std::to_string(size) +
                      " points, limit is " + std::to_string(kMaxGridPoints));
  }
}

}  // namespace

GridSpec GridSpec::cube(std::size_t dim, double lo, double hi, double step) {
  return {std::vector<double>(dim, lo), std::vector<double>(dim, hi), step};
}

GridSpec GridSpec::around(const Embedding& center, double radius, double step) {
  GridSpec g;
  g.step = step;
  for (double c : center) {
    g.lo.push_back(c - radius);
    g.hi.push_back(c + radius);
  }
  return g;
}

std::size_t GridSpec::points_on_axis(std::size_t axis) const {
  const double span = hi[axis] - lo[axis];
  if (span < 0.0 || !(step > 0.0)) return 0;
  // tolerance keeps an endpoint that is a whole number of steps away
  return static_cast<std::size_t>(std::floor(span / step + 1e-9)) + 1;
}

std::uint64_t GridSpec::size() const {
  if (lo.empty()) return 0;
  std::uint64_t total = 1;
  for (std::size_t a = 0; a < dim(); ++a) {
    const std::uint64_t n = points_on_axis(a);
    if (n == 0) return 0;
    if (total > std::numeric_limits<std::uint64_t>::max() / n) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    total *= n;
  }
  return total;
}

OracleResult oracle_best(
    const GridSpec& grid,
    const std::function<double(const Embedding&)>& objective) {
  check_grid(grid);
  OracleResult best;
  best.fused = -std::numeric_limits<double>::infinity();
  for_each_point(grid, [&](const Embedding& point) {
    const double value = objective(point);
    ++best.points;
    if (value > best.fused) {
      best.fused = value;
      best.embedding = point;
    }
  });
  return best;
}

OracleResult oracle_best(const Environment& env, const SpeakerProfile& profile,
                         const TextFeatures& text, const GridSpec& grid) {
  if (grid.dim() != profile.true_embedding.size()) {
    throw DimensionError("oracle grid has dimension " +
                         std::to_string(grid.dim()) + ", embedding has " +
                         std::to_string(profile.true_embedding.size()));
  }
  return oracle_best(grid, [&](const Embedding& e) {
    return env.fused_score(profile, text, e);
  });
}

double min_voiceprint_norm(const VoiceModel& model, const TextFeatures& text,
                           const GridSpec& grid) {
  check_grid(grid);
  double lowest = std::numeric_limits<double>::infinity();
  for_each_point(grid, [&](const Embedding& point) {
    lowest = std::min(lowest,
                      l2_norm(model.voiceprint(model.synth(text, point)).span()));
  });
  return lowest;
}

double grid_resolution_slack(const VoiceModel& model,
                             const scoring::RewardWeights& weights,
                             const GridSpec& grid, double min_norm) {
  if (!(min_norm > 0.0)) return std::numeric_limits<double>::infinity();
  double lipschitz = 0.5 * model.voiceprint_norm_bound() / min_norm;
  if (weights.enable_mos) lipschitz += weights.lambda1 * model.params().beta;
  if (weights.enable_intell) lipschitz += weights.lambda2 * model.params().kappa;
  return lipschitz * 0.5 * grid.step *
         std::sqrt(static_cast<double>(grid.dim()));
}

}  // namespace asrrl::env
