#ifndef ASRRL_AGENT_POLICY_HPP_
#define ASRRL_AGENT_POLICY_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "asrrl/agent/tape.hpp"
#include "asrrl/core/action.hpp"
#include "asrrl/core/config.hpp"
#include "asrrl/core/rng.hpp"
#include "asrrl/core/state.hpp"

namespace asrrl::agent {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct Parameter {
  std::string name;
  Mat value;
  bool trainable = true;
};

struct PolicySpec {
  StateLayout layout;
  Scenario scenario = Scenario::single_sentence;
  // d_e for SS, k for FS
  std::size_t action_dim = 0;
  EncoderKind encoder = EncoderKind::sequence;
  int hidden = 64;
  int layers = 2;

  static PolicySpec from_config(const RLConfig& config, Scenario scenario,
                                const StateLayout& layout);
  void validate() const;
  friend bool operator==(const PolicySpec&, const PolicySpec&) = default;
};

// Per-row Gaussian head output. log_std is state-independent, clamped.
struct Distribution {
  Mat mean;
  Eigen::RowVectorXd log_std;
  Eigen::VectorXd value;
};

class Policy {
 public:
  struct Outputs {
    Var mean;
    Var log_std;  // 1 x action_dim, already clamped
    Var value;    // n x 1
  };

  static Policy initialize(const PolicySpec& spec, Rng& rng,
                           double init_log_std = 0.0);
  // Rebuilds from named arrays; every expected name must be present with the
  // expected shape.
  static Policy from_parameters(const PolicySpec& spec,
                                std::vector<Parameter> params);

  const PolicySpec& spec() const { return spec_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<Parameter>& parameters() { return params_; }
  const Parameter& parameter(const std::string& name) const;
  // trainable scalar count
  std::size_t parameter_count() const;

  // Fixed input standardization, stored with the weights but never trained.
  void fit_normalizer(const Mat& states);

  // grads, when given, is resized to match parameters() and receives the
  // gradient contributions on tape.backward().
  Outputs forward(Tape& tape, const Mat& states,
                  std::vector<Mat>* grads = nullptr) const;
  Distribution evaluate(const Mat& states) const;

  // "name=norm, ..." for diagnostics
  std::string norms_report() const;

 private:
  Policy(PolicySpec spec, std::vector<Parameter> params);
  Var p(Tape& tape, const std::string& name, std::vector<Mat>* grads) const;
  Var encode_sequence(Tape& tape, Var x, std::vector<Mat>* grads) const;
  Var encode_mlp(Tape& tape, Var x, std::vector<Mat>* grads) const;

  PolicySpec spec_;
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

enum class ActionMode { sample, mode };

struct ActionSample {
  Action action;
  // pre-squash Gaussian draw for SS, the logits themselves for FS
  Vector raw;
  double log_prob = 0.0;
  double value = 0.0;
};

ActionSample select_action(const Policy& policy, const StateVector& state,
                           ActionMode mode, Rng& rng);
// One forward pass over a batch of flattened states (one per row).
std::vector<ActionSample> select_actions(const Policy& policy,
                                         const Mat& states, ActionMode mode,
                                         Rng& rng);

double gaussian_log_prob(std::span<const double> x,
                         std::span<const double> mean,
                         std::span<const double> log_std);
// log |d tanh(u)/du| summed over components, computed stably
double tanh_log_det(std::span<const double> u);
// Density of a = tanh(u), u ~ N(mean, exp(log_std)^2), expressed through u.
double squashed_log_prob(std::span<const double> u,
                         std::span<const double> mean,
                         std::span<const double> log_std);

Mat stack_states(const std::vector<StateVector>& states);

}  // namespace asrrl::agent

#endif  // ASRRL_AGENT_POLICY_HPP_
