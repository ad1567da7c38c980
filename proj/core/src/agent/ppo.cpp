#include "asrrl/agent/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <spdlog/spdlog.h>

#include "asrrl/core/error.hpp"

namespace asrrl::agent {

void RolloutBatch::validate() const {
  const std::size_t n = rewards.size();
  const auto rows = static_cast<std::size_t>(states.rows());
  if (rows != n || static_cast<std::size_t>(raw_actions.rows()) != n ||
      log_probs.size() != n || values.size() != n || dones.size() != n ||
      advantages.size() != n || returns.size() != n) {
    throw DimensionError("rollout batch: sequences differ in length");
  }
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              const std::vector<bool>& dones, double gamma, double gae_lambda,
              double last_value) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw DimensionError("gae: rewards, values and dones differ in length");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0) ||
      !(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw ConfigError("gae: gamma and gae_lambda must lie in [0, 1]");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    double next_value;
    if (dones[i]) {
      next_value = 0.0;
      running = 0.0;
    } else {
      next_value = i + 1 < n ? values[i + 1] : last_value;
    }
    const double delta = rewards[i] + gamma * next_value - values[i];
    running = delta + gamma * gae_lambda * running;
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
  }
  return out;
}

void normalize_advantages(std::vector<double>& advantages) {
  const std::size_t n = advantages.size();
  if (n < 2) return;
  const double mean =
      std::accumulate(advantages.begin(), advantages.end(), 0.0) /
      static_cast<double>(n);
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(n);
  const double sd = var < 1e-8 ? 1.0 : std::sqrt(var);
  for (double& a : advantages) a = (a - mean) / sd;
}

double clipped_surrogate(double ratio, double advantage, double clip_epsilon) {
  const double clipped =
      std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

PpoSettings PpoSettings::from_config(const RLConfig& config) {
  PpoSettings s;
  s.clip_epsilon = config.clip_epsilon;
  s.update_epochs = config.update_epochs;
  s.learning_rate = config.learning_rate;
  s.minibatch_size = static_cast<std::size_t>(config.minibatch_size);
  s.entropy_coef = config.entropy_coef;
  s.value_coef = config.value_coef;
  s.max_grad_norm = config.max_grad_norm;
  s.normalize_advantages = config.normalize_advantages;
  return s;
}

void PpoSettings::validate() const {
  if (!(clip_epsilon > 0.0)) throw ConfigError("clip_epsilon must be > 0");
  if (update_epochs < 1) throw ConfigError("update_epochs must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (minibatch_size < 1) throw ConfigError("minibatch_size must be >= 1");
}

Adam::Adam(const Policy& policy, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : policy.parameters()) {
    m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  }
}

void Adam::step(Policy& policy, const std::vector<Mat>& grads,
                double learning_rate) {
  auto& params = policy.parameters();
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable || grads[i].size() == 0) continue;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
    params[i].value.array() -= learning_rate * (m_[i].array() / c1) /
                               ((v_[i].array() / c2).sqrt() + eps_);
  }
}

LossReport ppo_loss(const Policy& policy, const RolloutBatch& batch,
                    std::span<const std::size_t> indices,
                    const PpoSettings& settings, std::vector<Mat>* grads) {
  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(batch.size());
    std::iota(all.begin(), all.end(), 0);
    indices = all;
  }
  const auto n = static_cast<Eigen::Index>(indices.size());
  const Eigen::Index a = batch.raw_actions.cols();
  const bool ss = policy.spec().scenario == Scenario::single_sentence;

  Mat states(n, batch.states.cols());
  Mat raw(n, a);
  Mat old_logp(n, 1), adv(n, 1), ret(n, 1), correction(n, 1);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t i = indices[static_cast<std::size_t>(r)];
    states.row(r) = batch.states.row(static_cast<Eigen::Index>(i));
    raw.row(r) = batch.raw_actions.row(static_cast<Eigen::Index>(i));
    old_logp(r, 0) = batch.log_probs[i];
    adv(r, 0) = batch.advantages[i];
    ret(r, 0) = batch.returns[i];
    correction(r, 0) =
        ss ? tanh_log_det(std::span<const double>(raw.row(r).data(),
                                                  static_cast<std::size_t>(a)))
           : 0.0;
  }

  Tape tape(grads != nullptr);
  const auto out = policy.forward(tape, states, grads);

  // log N(u; mu, sigma) summed over action components, minus the tanh term
  Var log_std_rows = tape.broadcast_rows(out.log_std, static_cast<std::size_t>(n));
  Var z = tape.mul(tape.sub(tape.constant(raw), out.mean),
                   tape.exp(tape.scale(log_std_rows, -1.0)));
  Var per_dim = tape.add(tape.scale(tape.square(z), -0.5),
                         tape.scale(log_std_rows, -1.0));
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  Var logp = tape.add_scalar(tape.sum_rows(per_dim),
                             -half_log_2pi * static_cast<double>(a));
  logp = tape.sub(logp, tape.constant(correction));

  Var log_ratio = tape.sub(logp, tape.constant(old_logp));
  Var ratio = tape.exp(log_ratio);
  Var adv_v = tape.constant(adv);
  Var unclipped = tape.mul(ratio, adv_v);
  Var clipped = tape.mul(tape.clamp(ratio, 1.0 - settings.clip_epsilon,
                                    1.0 + settings.clip_epsilon),
                         adv_v);
  Var surrogate = tape.mean(tape.min(unclipped, clipped));
  Var policy_loss = tape.scale(surrogate, -1.0);

  Var value_err = tape.sub(out.value, tape.constant(ret));
  Var value_loss = tape.mean(tape.square(value_err));

  // Entropy of the (pre-squash) diagonal Gaussian; state independent.
  const double gauss_const = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  Var entropy = tape.add_scalar(tape.sum(out.log_std),
                                gauss_const * static_cast<double>(a));

  Var total = tape.add(policy_loss, tape.scale(value_loss, settings.value_coef));
  total = tape.sub(total, tape.scale(entropy, settings.entropy_coef));

  LossReport rep;
  rep.policy_loss = tape.scalar(policy_loss);
  rep.value_loss = tape.scalar(value_loss);
  rep.entropy = tape.scalar(entropy);
  rep.total = tape.scalar(total);
  const Mat& lr = tape.value(log_ratio);
  const Mat& rv = tape.value(ratio);
  rep.approx_kl = -lr.mean();
  double clipped_count = 0.0;
  double max_ratio = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const double x = rv(r, 0);
    max_ratio = std::max(max_ratio, std::isfinite(x) ? x : HUGE_VAL);
    if (std::abs(x - 1.0) > settings.clip_epsilon) clipped_count += 1.0;
  }
  rep.clip_fraction = clipped_count / static_cast<double>(n);
  rep.minibatches = 1;
  if (!std::isfinite(rep.total)) {
    throw NumericalError("PPO loss is not finite; parameter norms: " +
                         policy.norms_report());
  }
  if (max_ratio > kMaxImportanceRatio) {
    rep.rejected = true;
    return rep;
  }
  if (grads != nullptr) tape.backward(total);
  return rep;
}

LossReport ppo_update(Policy& policy, Adam& optimizer, RolloutBatch batch,
                      const PpoSettings& settings, Rng& rng) {
  settings.validate();
  batch.validate();
  const std::size_t n = batch.size();
  if (n == 0) throw DimensionError("ppo_update: empty batch");
  if (settings.normalize_advantages && n > 1) {
    normalize_advantages(batch.advantages);
  }

  const Policy snapshot_policy = policy;
  const Adam snapshot_opt = optimizer;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  LossReport sum;
  for (int epoch = 0; epoch < settings.update_epochs; ++epoch) {
    // Fisher-Yates with the portable generator
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }
    for (std::size_t start = 0; start < n; start += settings.minibatch_size) {
      const std::size_t end = std::min(n, start + settings.minibatch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<Mat> grads;
      const LossReport rep = ppo_loss(policy, batch, idx, settings, &grads);
      if (rep.rejected) {
        spdlog::warn(
            "PPO batch rejected: importance ratio above {} (epoch {}); "
            "parameters restored",
            kMaxImportanceRatio, epoch);
        policy = snapshot_policy;
        optimizer = snapshot_opt;
        LossReport out = rep;
        out.rejected = true;
        return out;
      }
      if (settings.max_grad_norm > 0.0) {
        double sq = 0.0;
        for (const auto& g : grads) {
          if (g.size() != 0) sq += g.squaredNorm();
        }
        const double norm = std::sqrt(sq);
        if (!std::isfinite(norm)) {
          throw NumericalError("non-finite gradient; parameter norms: " +
                               policy.norms_report());
        }
        if (norm > settings.max_grad_norm) {
          const double s = settings.max_grad_norm / norm;
          for (auto& g : grads) g *= s;
        }
      }
      optimizer.step(policy, grads, settings.learning_rate);
      sum.policy_loss += rep.policy_loss;
      sum.value_loss += rep.value_loss;
      sum.entropy += rep.entropy;
      sum.approx_kl += rep.approx_kl;
      sum.clip_fraction += rep.clip_fraction;
      sum.total += rep.total;
      sum.minibatches += 1;
    }
  }
  const double m = static_cast<double>(sum.minibatches);
  sum.policy_loss /= m;
  sum.value_loss /= m;
  sum.entropy /= m;
  sum.approx_kl /= m;
  sum.clip_fraction /= m;
  sum.total /= m;
  return sum;
}

}  // namespace asrrl::agent
