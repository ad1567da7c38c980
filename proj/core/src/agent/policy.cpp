#include "asrrl/agent/policy.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "asrrl/core/error.hpp"

namespace asrrl::agent {

namespace {

Mat normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                  double stddev) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = stddev * rng.normal();
  }
  return m;
}

std::string token_name(SegmentKind kind) {
  return "tok." + std::string(to_string(kind));
}

std::string block_name(int layer, const char* leaf) {
  return "blk" + std::to_string(layer) + "." + leaf;
}

// Names and shapes in a fixed order; initialization draws follow it.
struct Slot {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
  enum Init { lecun, zeros, ones, small, log_std, norm_mean, norm_scale } init;
  bool trainable = true;
};

std::vector<Slot> layout_slots(const PolicySpec& spec) {
  const auto h = static_cast<Eigen::Index>(spec.hidden);
  const auto n = static_cast<Eigen::Index>(spec.layout.flat_size());
  const auto a = static_cast<Eigen::Index>(spec.action_dim);
  std::vector<Slot> s;
  s.push_back({"norm.mean", 1, n, Slot::norm_mean, false});
  s.push_back({"norm.scale", 1, n, Slot::norm_scale, false});
  if (spec.encoder == EncoderKind::sequence) {
    for (const auto& seg : spec.layout.segments()) {
      const auto len = static_cast<Eigen::Index>(seg.length);
      s.push_back({token_name(seg.kind) + ".w", len, h, Slot::lecun});
      s.push_back({token_name(seg.kind) + ".embed", 1, h, Slot::small});
    }
    for (int l = 0; l < spec.layers; ++l) {
      s.push_back({block_name(l, "ln1.g"), 1, h, Slot::ones});
      s.push_back({block_name(l, "ln1.b"), 1, h, Slot::zeros});
      s.push_back({block_name(l, "wq"), h, h, Slot::lecun});
      s.push_back({block_name(l, "wk"), h, h, Slot::lecun});
      s.push_back({block_name(l, "wv"), h, h, Slot::lecun});
      s.push_back({block_name(l, "wo"), h, h, Slot::lecun});
      s.push_back({block_name(l, "ln2.g"), 1, h, Slot::ones});
      s.push_back({block_name(l, "ln2.b"), 1, h, Slot::zeros});
      s.push_back({block_name(l, "mlp.w1"), h, h, Slot::lecun});
      s.push_back({block_name(l, "mlp.b1"), 1, h, Slot::zeros});
      s.push_back({block_name(l, "mlp.w2"), h, h, Slot::lecun});
      s.push_back({block_name(l, "mlp.b2"), 1, h, Slot::zeros});
    }
    s.push_back({"out.ln.g", 1, h, Slot::ones});
    s.push_back({"out.ln.b", 1, h, Slot::zeros});
  } else {
    Eigen::Index in = n;
    for (int l = 0; l < spec.layers; ++l) {
      s.push_back({"mlp" + std::to_string(l) + ".w", in, h, Slot::lecun});
      s.push_back({"mlp" + std::to_string(l) + ".b", 1, h, Slot::zeros});
      in = h;
    }
  }
  s.push_back({"pi.w", h, a, Slot::small});
  s.push_back({"pi.b", 1, a, Slot::zeros});
  s.push_back({"pi.log_std", 1, a, Slot::log_std});
  s.push_back({"v.w", h, 1, Slot::lecun});
  s.push_back({"v.b", 1, 1, Slot::zeros});
  return s;
}

}  // namespace

PolicySpec PolicySpec::from_config(const RLConfig& config, Scenario scenario,
                                   const StateLayout& layout) {
  PolicySpec spec;
  spec.layout = layout;
  spec.scenario = scenario;
  spec.action_dim =
      scenario == Scenario::single_sentence ? layout.embedding_dim : config.k;
  spec.encoder = config.encoder;
  spec.hidden = config.hidden;
  spec.layers = config.layers;
  spec.validate();
  return spec;
}

void PolicySpec::validate() const {
  layout.validate();
  if (action_dim == 0) throw ConfigError("policy: action dimension is zero");
  if (scenario == Scenario::single_sentence &&
      action_dim != layout.embedding_dim) {
    throw ConfigError("policy: SS action dimension must equal d_e");
  }
  if (hidden < 1) throw ConfigError("policy: hidden must be >= 1");
  if (layers < (encoder == EncoderKind::mlp ? 1 : 0)) {
    throw ConfigError("policy: invalid layer count");
  }
}

Policy::Policy(PolicySpec spec, std::vector<Parameter> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    index_[params_[i].name] = i;
  }
}

Policy Policy::initialize(const PolicySpec& spec, Rng& rng,
                          double init_log_std) {
  spec.validate();
  std::vector<Parameter> params;
  for (const auto& slot : layout_slots(spec)) {
    Mat m;
    switch (slot.init) {
      case Slot::lecun:
        m = normal_matrix(rng, slot.rows, slot.cols,
                          1.0 / std::sqrt(static_cast<double>(slot.rows)));
        break;
      case Slot::small:
        m = normal_matrix(rng, slot.rows, slot.cols, 0.01);
        break;
      case Slot::zeros:
      case Slot::norm_mean:
        m = Mat::Zero(slot.rows, slot.cols);
        break;
      case Slot::ones:
      case Slot::norm_scale:
        m = Mat::Ones(slot.rows, slot.cols);
        break;
      case Slot::log_std:
        m = Mat::Constant(slot.rows, slot.cols,
                          std::clamp(init_log_std, kLogStdMin, kLogStdMax));
        break;
    }
    params.push_back({slot.name, std::move(m), slot.trainable});
  }
  return Policy(spec, std::move(params));
}

Policy Policy::from_parameters(const PolicySpec& spec,
                               std::vector<Parameter> params) {
  spec.validate();
  std::map<std::string, Parameter*> by_name;
  for (auto& p : params) by_name[p.name] = &p;
  std::vector<Parameter> ordered;
  for (const auto& slot : layout_slots(spec)) {
    auto it = by_name.find(slot.name);
    if (it == by_name.end()) {
      throw DimensionError("policy: missing parameter '" + slot.name + "'");
    }
    Parameter& p = *it->second;
    if (p.value.rows() != slot.rows || p.value.cols() != slot.cols) {
      throw DimensionError("policy: parameter '" + slot.name + "' has shape " +
                           std::to_string(p.value.rows()) + "x" +
                           std::to_string(p.value.cols()) + ", expected " +
                           std::to_string(slot.rows) + "x" +
                           std::to_string(slot.cols));
    }
    ordered.push_back({slot.name, std::move(p.value), slot.trainable});
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    throw DimensionError("policy: unexpected parameter '" +
                         by_name.begin()->first + "'");
  }
  return Policy(spec, std::move(ordered));
}

const Parameter& Policy::parameter(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("policy: no parameter '" + name + "'");
  return params_[it->second];
}

std::size_t Policy::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += static_cast<std::size_t>(p.value.size());
  }
  return n;
}

void Policy::fit_normalizer(const Mat& states) {
  if (states.rows() == 0 ||
      states.cols() != static_cast<Eigen::Index>(spec_.layout.flat_size())) {
    throw DimensionError("fit_normalizer: state matrix has wrong shape");
  }
  Mat mean = states.colwise().mean();
  Mat centered = states.rowwise() - mean.row(0);
  Mat var = centered.array().square().colwise().mean();
  Mat scale(1, states.cols());
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    const double sd = std::sqrt(var(0, j));
    scale(0, j) = sd > 1e-8 ? 1.0 / sd : 1.0;
  }
  params_[index_.at("norm.mean")].value = mean;
  params_[index_.at("norm.scale")].value = scale;
}

Var Policy::p(Tape& tape, const std::string& name,
              std::vector<Mat>* grads) const {
  const std::size_t i = index_.at(name);
  const Parameter& par = params_[i];
  Mat* sink = (grads != nullptr && par.trainable) ? &(*grads)[i] : nullptr;
  return tape.param(par.value, sink);
}

Var Policy::encode_sequence(Tape& tape, Var x, std::vector<Mat>* grads) const {
  const auto segments = spec_.layout.segments();
  const std::size_t n = static_cast<std::size_t>(tape.value(x).rows());
  std::vector<Var> tokens;
  for (const auto& seg : segments) {
    const std::string base = token_name(seg.kind);
    Var part = tape.slice_cols(x, seg.offset, seg.length);
    Var tok = tape.matmul(part, p(tape, base + ".w", grads));
    tokens.push_back(tape.add_row(tok, p(tape, base + ".embed", grads)));
  }
  (void)n;
  const std::size_t T = tokens.size();
  Var h = tape.interleave(tokens);
  for (int l = 0; l < spec_.layers; ++l) {
    Var a = tape.layer_norm(h);
    a = tape.add_row(tape.mul_row(a, p(tape, block_name(l, "ln1.g"), grads)),
                     p(tape, block_name(l, "ln1.b"), grads));
    Var q = tape.matmul(a, p(tape, block_name(l, "wq"), grads));
    Var k = tape.matmul(a, p(tape, block_name(l, "wk"), grads));
    Var v = tape.matmul(a, p(tape, block_name(l, "wv"), grads));
    Var att = tape.attention(q, k, v, T);
    h = tape.add(h, tape.matmul(att, p(tape, block_name(l, "wo"), grads)));

    Var b = tape.layer_norm(h);
    b = tape.add_row(tape.mul_row(b, p(tape, block_name(l, "ln2.g"), grads)),
                     p(tape, block_name(l, "ln2.b"), grads));
    b = tape.tanh(tape.add_row(
        tape.matmul(b, p(tape, block_name(l, "mlp.w1"), grads)),
        p(tape, block_name(l, "mlp.b1"), grads)));
    b = tape.add_row(tape.matmul(b, p(tape, block_name(l, "mlp.w2"), grads)),
                     p(tape, block_name(l, "mlp.b2"), grads));
    h = tape.add(h, b);
  }
  Var pooled = tape.layer_norm(tape.mean_pool(h, T));
  return tape.add_row(tape.mul_row(pooled, p(tape, "out.ln.g", grads)),
                      p(tape, "out.ln.b", grads));
}

Var Policy::encode_mlp(Tape& tape, Var x, std::vector<Mat>* grads) const {
  Var h = x;
  for (int l = 0; l < spec_.layers; ++l) {
    const std::string base = "mlp" + std::to_string(l);
    h = tape.tanh(tape.add_row(tape.matmul(h, p(tape, base + ".w", grads)),
                               p(tape, base + ".b", grads)));
  }
  return h;
}

Policy::Outputs Policy::forward(Tape& tape, const Mat& states,
                                std::vector<Mat>* grads) const {
  if (states.cols() != static_cast<Eigen::Index>(spec_.layout.flat_size())) {
    throw DimensionError("policy: state length " +
                         std::to_string(states.cols()) + ", expected " +
                         std::to_string(spec_.layout.flat_size()));
  }
  if (grads != nullptr) grads->resize(params_.size());
  const Mat& mu = parameter("norm.mean").value;
  const Mat& sc = parameter("norm.scale").value;
  Mat normalized = (states.rowwise() - mu.row(0)).array().rowwise() *
                   sc.row(0).array();
  Var x = tape.constant(std::move(normalized));
  Var h = spec_.encoder == EncoderKind::sequence ? encode_sequence(tape, x, grads)
                                                 : encode_mlp(tape, x, grads);
  Outputs out;
  out.mean = tape.add_row(tape.matmul(h, p(tape, "pi.w", grads)),
                          p(tape, "pi.b", grads));
  out.log_std = tape.clamp(p(tape, "pi.log_std", grads), kLogStdMin, kLogStdMax);
  out.value = tape.add_row(tape.matmul(h, p(tape, "v.w", grads)),
                           p(tape, "v.b", grads));
  return out;
}

Distribution Policy::evaluate(const Mat& states) const {
  Tape tape(false);
  const Outputs o = forward(tape, states);
  Distribution d;
  d.mean = tape.value(o.mean);
  d.log_std = tape.value(o.log_std).row(0);
  d.value = tape.value(o.value).col(0);
  if (!d.mean.allFinite() || !d.value.allFinite() || !d.log_std.allFinite()) {
    throw NumericalError("policy produced a non-finite output; parameter norms: " +
                         norms_report());
  }
  return d;
}

std::string Policy::norms_report() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& par : params_) {
    if (!first) os << ", ";
    first = false;
    os << par.name << "=" << par.value.norm();
  }
  return os.str();
}

double gaussian_log_prob(std::span<const double> x,
                         std::span<const double> mean,
                         std::span<const double> log_std) {
  if (x.size() != mean.size() || x.size() != log_std.size()) {
    throw DimensionError("gaussian_log_prob: length mismatch");
  }
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - mean[i]) * std::exp(-log_std[i]);
    total += -0.5 * z * z - log_std[i] - half_log_2pi;
  }
  return total;
}

double tanh_log_det(std::span<const double> u) {
  // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
  double total = 0.0;
  for (double x : u) {
    const double m = -2.0 * x;
    const double softplus = m > 0 ? m + std::log1p(std::exp(-m))
                                  : std::log1p(std::exp(m));
    total += 2.0 * (std::numbers::ln2 - x - softplus);
  }
  return total;
}

double squashed_log_prob(std::span<const double> u,
                         std::span<const double> mean,
                         std::span<const double> log_std) {
  return gaussian_log_prob(u, mean, log_std) - tanh_log_det(u);
}

std::vector<ActionSample> select_actions(const Policy& policy,
                                         const Mat& states, ActionMode mode,
                                         Rng& rng) {
  const Distribution d = policy.evaluate(states);
  const std::size_t a = policy.spec().action_dim;
  const bool ss = policy.spec().scenario == Scenario::single_sentence;
  std::vector<double> log_std(d.log_std.data(), d.log_std.data() + a);
  std::vector<ActionSample> out;
  out.reserve(static_cast<std::size_t>(states.rows()));
  for (Eigen::Index r = 0; r < states.rows(); ++r) {
    Vector mean(a);
    for (std::size_t i = 0; i < a; ++i) mean[i] = d.mean(r, static_cast<Eigen::Index>(i));
    Vector raw = mean;
    if (mode == ActionMode::sample) {
      for (std::size_t i = 0; i < a; ++i) {
        raw[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
      }
    }
    ActionSample s;
    s.raw = raw;
    s.value = d.value(r);
    if (ss) {
      Vector delta(a);
      for (std::size_t i = 0; i < a; ++i) delta[i] = std::tanh(raw[i]);
      s.action = RefinementAction{std::move(delta)};
      s.log_prob = squashed_log_prob(raw, mean, log_std);
    } else {
      s.action = FusionAction{raw};
      s.log_prob = gaussian_log_prob(raw, mean, log_std);
    }
    out.push_back(std::move(s));
  }
  return out;
}

ActionSample select_action(const Policy& policy, const StateVector& state,
                           ActionMode mode, Rng& rng) {
  if (state.layout() != policy.spec().layout) {
    throw DimensionError("select_action: state layout does not match policy");
  }
  Mat m(1, static_cast<Eigen::Index>(state.size()));
  for (std::size_t i = 0; i < state.size(); ++i) {
    m(0, static_cast<Eigen::Index>(i)) = state.flat()[i];
  }
  return std::move(select_actions(policy, m, mode, rng).front());
}

Mat stack_states(const std::vector<StateVector>& states) {
  if (states.empty()) return Mat(0, 0);
  const auto cols = static_cast<Eigen::Index>(states.front().size());
  Mat m(static_cast<Eigen::Index>(states.size()), cols);
  for (std::size_t r = 0; r < states.size(); ++r) {
    if (static_cast<Eigen::Index>(states[r].size()) != cols) {
      throw DimensionError("stack_states: ragged state lengths");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), c) = states[r].flat()[static_cast<std::size_t>(c)];
    }
  }
  return m;
}

}  // namespace asrrl::agent
