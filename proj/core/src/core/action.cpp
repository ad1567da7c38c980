#include "asrrl/core/action.hpp"

#include <algorithm>
#include <string>

#include "asrrl/core/error.hpp"

namespace asrrl {

namespace {

void check_refs(std::span<const Embedding> refs, const char* op) {
  if (refs.empty()) {
    throw DimensionError(std::string(op) + ": reference list is empty");
  }
  const std::size_t dim = refs.front().size();
  if (dim == 0) throw DimensionError(std::string(op) + ": d_e must be >= 1");
  for (std::size_t i = 1; i < refs.size(); ++i) {
    if (refs[i].size() != dim) {
      throw DimensionError(std::string(op) + ": reference " +
                           std::to_string(i) + " has dimension " +
                           std::to_string(refs[i].size()) + ", expected " +
                           std::to_string(dim));
    }
  }
}

Embedding weighted_sum(std::span<const Embedding> refs,
                       std::span<const double> weights) {
  const std::size_t dim = refs.front().size();
  Embedding out(dim);
  std::vector<double> terms(refs.size());
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < refs.size(); ++i) {
      terms[i] = weights[i] * refs[i][j];
    }
    out[j] = order_independent_sum(terms);
  }
  return out;
}

}  // namespace

Scenario scenario_of(const Action& action) {
  return std::holds_alternative<RefinementAction>(action)
             ? Scenario::single_sentence
             : Scenario::few_sentence;
}

std::span<const double> action_values(const Action& action) {
  if (const auto* ss = std::get_if<RefinementAction>(&action)) return ss->delta;
  return std::get<FusionAction>(action).logits;
}

double order_independent_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum;
}

Embedding apply_ss(const Embedding& embedding, const RefinementAction& action,
                   double action_scale) {
  if (!(action_scale > 0.0) || !std::isfinite(action_scale)) {
    throw ActionError("apply_ss: action_scale must be a positive finite value");
  }
  if (action.delta.size() != embedding.size()) {
    throw DimensionError("apply_ss: delta has length " +
                         std::to_string(action.delta.size()) +
                         ", embedding has " + std::to_string(embedding.size()));
  }
  Embedding out = embedding;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = action.delta[i];
    if (!std::isfinite(d)) {
      throw ActionError("apply_ss: delta[" + std::to_string(i) +
                        "] is not finite");
    }
    if (std::abs(d) > 1.0) {
      throw ActionError("apply_ss: delta[" + std::to_string(i) + "] = " +
                        std::to_string(d) + " outside [-1, 1]");
    }
    const double from = out[i];
    out[i] = from + action_scale * d;
    // rounding of the sum can overshoot the bound by an ulp; pull it back
    while (std::abs(out[i] - from) > action_scale) {
      out[i] = std::nextafter(out[i], from);
    }
  }
  return out;
}

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) throw DimensionError("softmax: empty logits");
  double top = logits.front();
  for (double l : logits) {
    if (!std::isfinite(l)) throw ActionError("softmax: non-finite logit");
    top = std::max(top, l);
  }
  Vector w(logits.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(logits[i] - top);
  std::vector<double> terms = w;
  const double total = order_independent_sum(terms);
  for (double& x : w) x /= total;
  return w;
}

FusionResult fuse_fs(std::span<const Embedding> refs,
                     const FusionAction& action) {
  check_refs(refs, "fuse_fs");
  if (action.logits.size() != refs.size()) {
    throw DimensionError("fuse_fs: " + std::to_string(action.logits.size()) +
                         " logits for " + std::to_string(refs.size()) +
                         " references");
  }
  FusionResult result;
  result.weights = softmax(action.logits);
  result.fused = weighted_sum(refs, result.weights);
  return result;
}

Embedding mean_init(std::span<const Embedding> refs) {
  check_refs(refs, "mean_init");
  // 1/k is exactly what softmax yields for equal logits
  const Vector weights(refs.size(), 1.0 / static_cast<double>(refs.size()));
  return weighted_sum(refs, weights);
}

}  // namespace asrrl
