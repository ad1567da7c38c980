#ifndef ASRRL_AGENT_PPO_HPP_
#define ASRRL_AGENT_PPO_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "asrrl/agent/policy.hpp"
#include "asrrl/core/config.hpp"
#include "asrrl/core/rng.hpp"

namespace asrrl::agent {

inline constexpr double kMaxImportanceRatio = 1e3;

struct RolloutBatch {
  Mat states;       // n x state length
  Mat raw_actions;  // n x action_dim (pre-squash for SS)
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<bool> dones;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return rewards.size(); }
  // throws DimensionError when the sequences disagree in length
  void validate() const;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Steps are consecutive in time; dones[t] marks the last step of an episode.
// A trailing step without done bootstraps from last_value.
GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              const std::vector<bool>& dones, double gamma, double gae_lambda,
              double last_value = 0.0);

// In-place zero-mean, unit-variance scaling; left centred only when the
// variance is below 1e-8, untouched for a single element.
void normalize_advantages(std::vector<double>& advantages);

// min(rho A, clip(rho, 1 - eps, 1 + eps) A)
double clipped_surrogate(double ratio, double advantage, double clip_epsilon);

struct PpoSettings {
  double clip_epsilon = 0.2;
  int update_epochs = 4;
  double learning_rate = 3e-4;
  std::size_t minibatch_size = 64;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;

  static PpoSettings from_config(const RLConfig& config);
  void validate() const;
};

struct LossReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double total = 0.0;
  bool rejected = false;
  std::size_t minibatches = 0;
};

class Adam {
 public:
  explicit Adam(const Policy& policy, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(Policy& policy, const std::vector<Mat>& grads,
            double learning_rate);

 private:
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

// Full loss on the selected rows (all rows when indices is empty):
// -surrogate + value_coef * value loss - entropy_coef * entropy. The batch
// advantages are used as given. grads receives d loss / d parameters.
LossReport ppo_loss(const Policy& policy, const RolloutBatch& batch,
                    std::span<const std::size_t> indices,
                    const PpoSettings& settings, std::vector<Mat>* grads);

// Runs update_epochs passes of shuffled minibatches. If any minibatch shows
// an importance ratio above 1e3 the whole update is undone and reported as
// rejected. Advantages are normalized here when enabled and n > 1.
LossReport ppo_update(Policy& policy, Adam& optimizer, RolloutBatch batch,
                      const PpoSettings& settings, Rng& rng);

}  // namespace asrrl::agent

#endif  // ASRRL_AGENT_PPO_HPP_
