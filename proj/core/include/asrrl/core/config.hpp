#ifndef ASRRL_CORE_CONFIG_HPP_
#define ASRRL_CORE_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include "asrrl/core/types.hpp"

namespace asrrl {

enum class EncoderKind { sequence, mlp };

std::string_view to_string(EncoderKind kind);
EncoderKind parse_encoder(std::string_view text);

struct RLConfig {
  // reward and episode
  double gamma = 0.3;
  double lambda1 = 0.5;
  double lambda2 = 0.1;
  bool enable_mos = true;
  bool enable_intell = true;
  int steps_ss = 3;
  int steps_fs = 1;
  double action_scale = 0.001;

  // PPO
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  double learning_rate = 3e-4;
  int update_epochs = 4;
  int rollout_batch = 256;
  int minibatch_size = 32;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  double init_log_std = 0.0;
  int updates = 1500;

  // network
  EncoderKind encoder = EncoderKind::sequence;
  int hidden = 64;
  int layers = 2;

  std::uint64_t seed = 0;
  std::size_t d_e = 16;
  std::size_t d_t = 8;
  std::size_t k = 1;

  int steps(Scenario scenario) const {
    return scenario == Scenario::single_sentence ? steps_ss : steps_fs;
  }

  // throws ConfigError naming the offending field
  void validate() const;

  // flat key/value view, every field addressable by its name
  std::map<std::string, std::string> to_map() const;
  void set(const std::string& key, const std::string& value);

  friend bool operator==(const RLConfig&, const RLConfig&) = default;
};

}  // namespace asrrl

#endif  // ASRRL_CORE_CONFIG_HPP_
