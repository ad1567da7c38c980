#ifndef ASRRL_CORE_ACTION_HPP_
#define ASRRL_CORE_ACTION_HPP_

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "asrrl/core/types.hpp"

namespace asrrl {

// Single-sentence action: per-dimension refinement of the embedding,
// already squashed into [-1, 1] and not yet scaled.
struct RefinementAction {
  Vector delta;
  friend bool operator==(const RefinementAction&,
                         const RefinementAction&) = default;
};

// Few-sentence action: unnormalized fusion logits over the k references.
struct FusionAction {
  Vector logits;
  friend bool operator==(const FusionAction&, const FusionAction&) = default;
};

using Action = std::variant<RefinementAction, FusionAction>;

Scenario scenario_of(const Action& action);
std::span<const double> action_values(const Action& action);

// e'_i = e_i + scale * delta_i
Embedding apply_ss(const Embedding& embedding, const RefinementAction& action,
                   double action_scale);

struct FusionResult {
  Vector weights;
  Embedding fused;
};

// weights = softmax(logits), fused = sum_i weights_i * refs_i. Sums are
// order-independent, so permuting refs and logits together gives a
// bit-identical result.
FusionResult fuse_fs(std::span<const Embedding> refs,
                     const FusionAction& action);

// componentwise mean; bit-identical to fuse_fs with equal logits
Embedding mean_init(std::span<const Embedding> refs);

Vector softmax(std::span<const double> logits);

// Sum whose result does not depend on the order of the terms.
double order_independent_sum(std::vector<double>& terms);

}  // namespace asrrl

#endif  // ASRRL_CORE_ACTION_HPP_
