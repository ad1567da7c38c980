#include "asrrl/core/config.hpp"

#include <functional>

#include "asrrl/core/error.hpp"
#include "asrrl/core/numeric_text.hpp"

namespace asrrl {

namespace {

void require(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw ConfigError("config field '" + field + "' must be " + rule);
}

}  // namespace

std::string_view to_string(EncoderKind kind) {
  return kind == EncoderKind::sequence ? "sequence" : "mlp";
}

EncoderKind parse_encoder(std::string_view text) {
  if (text == "sequence" || text == "transformer") return EncoderKind::sequence;
  if (text == "mlp") return EncoderKind::mlp;
  throw ConfigError("unknown encoder '" + std::string(text) +
                    "' (expected sequence or mlp)");
}

void RLConfig::validate() const {
  require(gamma >= 0.0 && gamma <= 1.0, "gamma", "in [0, 1]");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda", "in [0, 1]");
  require(lambda1 >= 0.0 && std::isfinite(lambda1), "lambda1", ">= 0");
  require(lambda2 >= 0.0 && std::isfinite(lambda2), "lambda2", ">= 0");
  require(steps_ss >= 1, "steps_ss", ">= 1");
  require(steps_fs >= 1, "steps_fs", ">= 1");
  require(action_scale > 0.0 && std::isfinite(action_scale), "action_scale",
          "> 0");
  require(clip_epsilon > 0.0, "clip_epsilon", "> 0");
  require(learning_rate >= 0.0 && std::isfinite(learning_rate),
          "learning_rate", ">= 0");
  require(update_epochs >= 1, "update_epochs", ">= 1");
  require(rollout_batch >= 1, "rollout_batch", ">= 1");
  require(minibatch_size >= 1, "minibatch_size", ">= 1");
  require(entropy_coef >= 0.0, "entropy_coef", ">= 0");
  require(value_coef >= 0.0, "value_coef", ">= 0");
  require(max_grad_norm > 0.0, "max_grad_norm", "> 0");
  require(updates >= 0, "updates", ">= 0");
  require(hidden >= 1, "hidden", ">= 1");
  require(layers >= 1, "layers", ">= 1");
  require(d_e >= 1, "d_e", ">= 1");
  require(d_t >= 1, "d_t", ">= 1");
  require(k >= 1, "k", ">= 1");
}

std::map<std::string, std::string> RLConfig::to_map() const {
  auto d = [](double v) { return format_double(v); };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"gamma", d(gamma)},
      {"lambda1", d(lambda1)},
      {"lambda2", d(lambda2)},
      {"enable_mos", b(enable_mos)},
      {"enable_intell", b(enable_intell)},
      {"steps_ss", std::to_string(steps_ss)},
      {"steps_fs", std::to_string(steps_fs)},
      {"action_scale", d(action_scale)},
      {"gae_lambda", d(gae_lambda)},
      {"clip_epsilon", d(clip_epsilon)},
      {"learning_rate", d(learning_rate)},
      {"update_epochs", std::to_string(update_epochs)},
      {"rollout_batch", std::to_string(rollout_batch)},
      {"minibatch_size", std::to_string(minibatch_size)},
      {"entropy_coef", d(entropy_coef)},
      {"value_coef", d(value_coef)},
      {"max_grad_norm", d(max_grad_norm)},
      {"normalize_advantages", b(normalize_advantages)},
      {"init_log_std", d(init_log_std)},
      {"updates", std::to_string(updates)},
      {"encoder", std::string(to_string(encoder))},
      {"hidden", std::to_string(hidden)},
      {"layers", std::to_string(layers)},
      {"seed", std::to_string(seed)},
      {"d_e", std::to_string(d_e)},
      {"d_t", std::to_string(d_t)},
      {"k", std::to_string(k)},
  };
}

void RLConfig::set(const std::string& key, const std::string& value) {
  auto as_int = [&] { return static_cast<int>(parse_int(value, key)); };
  auto as_size = [&] { return static_cast<std::size_t>(parse_u64(value, key)); };
  auto as_double = [&] { return parse_double(value, key); };
  auto as_bool = [&] { return parse_bool(value, key); };

  const std::map<std::string, std::function<void()>> setters = {
      {"gamma", [&] { gamma = as_double(); }},
      {"lambda1", [&] { lambda1 = as_double(); }},
      {"lambda2", [&] { lambda2 = as_double(); }},
      {"enable_mos", [&] { enable_mos = as_bool(); }},
      {"enable_intell", [&] { enable_intell = as_bool(); }},
      {"steps_ss", [&] { steps_ss = as_int(); }},
      {"steps_fs", [&] { steps_fs = as_int(); }},
      {"action_scale", [&] { action_scale = as_double(); }},
      {"gae_lambda", [&] { gae_lambda = as_double(); }},
      {"clip_epsilon", [&] { clip_epsilon = as_double(); }},
      {"learning_rate", [&] { learning_rate = as_double(); }},
      {"update_epochs", [&] { update_epochs = as_int(); }},
      {"rollout_batch", [&] { rollout_batch = as_int(); }},
      {"minibatch_size", [&] { minibatch_size = as_int(); }},
      {"entropy_coef", [&] { entropy_coef = as_double(); }},
      {"value_coef", [&] { value_coef = as_double(); }},
      {"max_grad_norm", [&] { max_grad_norm = as_double(); }},
      {"normalize_advantages", [&] { normalize_advantages = as_bool(); }},
      {"init_log_std", [&] { init_log_std = as_double(); }},
      {"updates", [&] { updates = as_int(); }},
      {"encoder", [&] { encoder = parse_encoder(trim(value)); }},
      {"hidden", [&] { hidden = as_int(); }},
      {"layers", [&] { layers = as_int(); }},
      {"seed", [&] { seed = parse_u64(value, key); }},
      {"d_e", [&] { d_e = as_size(); }},
      {"d_t", [&] { d_t = as_size(); }},
      {"k", [&] { k = as_size(); }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) {
    throw ConfigError("unknown config key '" + key + "'");
  }
  it->second();
}

}  // namespace asrrl
