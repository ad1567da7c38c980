#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "asrrl/agent/checkpoint.hpp"
#include "asrrl/agent/policy.hpp"
#include "asrrl/agent/ppo.hpp"
#include "asrrl/core/error.hpp"
#include "doctest.h"
#include "policy_fixtures.hpp"

using namespace asrrl;
using namespace asrrl::agent;

namespace {

StateVector random_state(const StateLayout& layout, Rng& rng) {
  Vector flat(layout.flat_size());
  for (double& x : flat) x = rng.normal();
  return StateVector(layout, flat);
}

PolicySpec default_ss_spec() {
  RLConfig config;
  StateLayout layout{config.d_t, config.d_e, 8, {}};
  return PolicySpec::from_config(config, Scenario::single_sentence, layout);
}

}  // namespace

TEST_CASE("gae: discounted sums with lambda 1 and zero values") {
  const std::vector<double> r{1, 1, 1}, v{0, 0, 0};
  const auto g = gae(r, v, {false, false, true}, 0.5, 1.0);
  CHECK(g.advantages[0] == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(g.advantages[1] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(g.advantages[2] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("gae: gamma 0 gives reward minus value; zero case") {
  const std::vector<double> r{0.3, -0.2, 0.7}, v{0.1, 0.4, -0.5};
  const auto g = gae(r, v, {false, false, true}, 0.0, 0.95);
  for (int i = 0; i < 3; ++i) CHECK(g.advantages[i] == doctest::Approx(r[i] - v[i]));
  const std::vector<double> z{0, 0, 0};
  const auto g0 = gae(z, z, {false, true, true}, 0.9, 0.9);
  for (double a : g0.advantages) CHECK(a == 0.0);
}

TEST_CASE("gae: episode boundaries stop the recursion; shape checks") {
  const std::vector<double> r{1, 1, 1, 1}, v{0, 0, 0, 0};
  const auto g = gae(r, v, {false, true, false, true}, 0.5, 1.0);
  CHECK(g.advantages[0] == doctest::Approx(1.5));
  CHECK(g.advantages[2] == doctest::Approx(1.5));
  CHECK_THROWS_AS(gae(r, std::vector<double>{0, 0}, {true, true, true, true}, 0.5, 1.0),
                  DimensionError);
  CHECK_THROWS_AS(gae(r, v, {false, true, false, true}, 1.5, 1.0), ConfigError);
}

TEST_CASE("clipped surrogate branches") {
  CHECK(clipped_surrogate(1.0, 1.0, 0.2) == 1.0);
  CHECK(clipped_surrogate(2.0, 1.0, 0.2) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(clipped_surrogate(0.5, -1.0, 0.2) == doctest::Approx(-0.8).epsilon(1e-15));
}

TEST_CASE("advantage normalization guards") {
  std::vector<double> a{1, 2, 3, 4};
  normalize_advantages(a);
  double m = 0, v = 0;
  for (double x : a) m += x;
  m /= 4;
  for (double x : a) v += (x - m) * (x - m);
  CHECK(std::abs(m) < 1e-15);
  CHECK(v / 4 == doctest::Approx(1.0));
  std::vector<double> flat{2, 2, 2};
  normalize_advantages(flat);
  for (double x : flat) CHECK(x == 0.0);
  std::vector<double> one{5};
  normalize_advantages(one);
  CHECK(one[0] == 5.0);
}

TEST_CASE("select_action: mode is deterministic and SS stays in [-1, 1]") {
  Rng rng(3);
  Policy policy = Policy::initialize(default_ss_spec(), rng, 0.0);
  const auto state = random_state(policy.spec().layout, rng);
  Rng r1(1), r2(99);
  const auto a = select_action(policy, state, ActionMode::mode, r1);
  const auto b = select_action(policy, state, ActionMode::mode, r2);
  CHECK(a.action == b.action);
  CHECK(a.log_prob == b.log_prob);
  for (int i = 0; i < 50; ++i) {
    const auto s = select_action(policy, state, ActionMode::sample, rng);
    for (double d : std::get<RefinementAction>(s.action).delta) {
      CHECK(d >= -1.0);
      CHECK(d <= 1.0);
    }
  }
}

TEST_CASE("select_action: log_prob equals an independent density recomputation") {
  Rng rng(5);
  Policy policy = Policy::initialize(default_ss_spec(), rng, -0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto state = random_state(policy.spec().layout, rng);
    const auto s = select_action(policy, state, ActionMode::sample, rng);
    Mat m(1, static_cast<Eigen::Index>(state.size()));
    for (std::size_t i = 0; i < state.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = state.flat()[i];
    const auto d = policy.evaluate(m);
    // density of a = tanh(u): N(u) / prod(1 - a^2)
    double expected = 0.0;
    const auto& delta = std::get<RefinementAction>(s.action).delta;
    for (std::size_t i = 0; i < s.raw.size(); ++i) {
      const double sd = std::exp(d.log_std(static_cast<Eigen::Index>(i)));
      const double z = (s.raw[i] - d.mean(0, static_cast<Eigen::Index>(i))) / sd;
      expected += -0.5 * z * z - std::log(sd * std::sqrt(2 * std::numbers::pi));
      expected -= std::log(1 - delta[i] * delta[i]);
    }
    REQUIRE(std::isfinite(s.log_prob));
    CHECK(std::abs(s.log_prob - expected) <= 1e-9);
  }
}

TEST_CASE("FS head emits k Gaussian logits") {
  Rng rng(6);
  RLConfig cfg;
  cfg.k = 3;
  StateLayout layout{cfg.d_t, cfg.d_e, 8, {}};
  Policy policy = Policy::initialize(
      PolicySpec::from_config(cfg, Scenario::few_sentence, layout), rng, 0.0);
  const auto s = select_action(policy, random_state(layout, rng), ActionMode::sample, rng);
  const auto& logits = std::get<FusionAction>(s.action).logits;
  CHECK(logits.size() == 3);
  CHECK(logits == s.raw);
}

TEST_CASE("squashed Gaussian log-density matches a histogram of 1e6 samples") {
  const double mu = 0.4, log_sd = -0.2;
  Rng rng(11);
  const int bins = 100;
  std::vector<double> hist(bins, 0.0);
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double a = std::tanh(mu + std::exp(log_sd) * rng.normal());
    const int b = std::min(bins - 1, static_cast<int>((a + 1.0) / 2.0 * bins));
    hist[b] += 1.0;
  }
  const double w = 2.0 / bins;
  double l1 = 0.0;
  for (int b = 0; b < bins; ++b) {
    // integrate the analytic density over the bin with a fine midpoint rule
    double mass = 0.0;
    const int sub = 200;
    for (int s = 0; s < sub; ++s) {
      const double a = -1.0 + w * (b + (s + 0.5) / sub);
      const double u = std::atanh(a);
      const double m[1] = {mu}, l[1] = {log_sd}, uu[1] = {u};
      mass += std::exp(squashed_log_prob(uu, m, l)) * (w / sub);
    }
    l1 += std::abs(hist[b] / n - mass);
  }
  CHECK(l1 < 0.02);
}

TEST_CASE("PPO loss gradient matches central differences on tiny networks") {
  for (auto enc : {EncoderKind::mlp, EncoderKind::sequence}) {
    for (auto sc : {Scenario::single_sentence, Scenario::few_sentence}) {
      Rng rng(21);
      Policy policy = Policy::initialize(testing::tiny_spec(enc, sc), rng, -0.3);
      CAPTURE(policy.parameter_count());
      CHECK(policy.parameter_count() <= 200);
      const auto batch = testing::frozen_batch(policy, 2, rng);
      PpoSettings settings;
      const auto gc = testing::check_ppo_gradient(policy, batch, settings);
      CAPTURE(to_string(enc));
      CHECK(gc.max_rel_error <= 1e-4);
    }
  }
}

TEST_CASE("overfit: 200 epochs on one frozen batch cut value loss by 90%") {
  for (auto enc : {EncoderKind::mlp, EncoderKind::sequence}) {
  Rng rng(8);
  PolicySpec spec = default_ss_spec();
  spec.encoder = enc;
  Policy policy = Policy::initialize(spec, rng, 0.0);
  auto batch = testing::frozen_batch(policy, 64, rng);
  PpoSettings s;
  s.update_epochs = 1;
  s.minibatch_size = 64;
  s.learning_rate = 1e-3;
  s.max_grad_norm = 0.0;
  Adam opt(policy);
  const double before = ppo_loss(policy, batch, {}, s, nullptr).value_loss;
  for (int e = 0; e < 200; ++e) {
    ppo_update(policy, opt, batch, s, rng);
  }
  const double after = ppo_loss(policy, batch, {}, s, nullptr).value_loss;
  CAPTURE(to_string(enc));
  CHECK(after <= 0.1 * before);
  }
}

TEST_CASE("ppo_update: seeded runs reproduce loss curves; ratio guard restores") {
  auto run = [] {
    Rng rng(4);
    Policy policy = Policy::initialize(testing::tiny_spec(EncoderKind::sequence), rng, 0.0);
    Adam opt(policy);
    std::vector<double> curve;
    for (int i = 0; i < 5; ++i) {
      auto batch = testing::frozen_batch(policy, 32, rng);
      curve.push_back(ppo_update(policy, opt, batch, PpoSettings{}, rng).total);
    }
    return curve;
  };
  CHECK(run() == run());

  Rng rng(4);
  Policy policy = Policy::initialize(testing::tiny_spec(EncoderKind::mlp), rng, 0.0);
  auto batch = testing::frozen_batch(policy, 8, rng);
  batch.log_probs[3] -= 20.0;  // ratio e^20
  Adam opt(policy);
  const Policy before = policy;
  const auto rep = ppo_update(policy, opt, batch, PpoSettings{}, rng);
  CHECK(rep.rejected);
  for (std::size_t i = 0; i < policy.parameters().size(); ++i) {
    CHECK(policy.parameters()[i].value == before.parameters()[i].value);
  }
}

TEST_CASE("log-std is clamped to [-5, 2]") {
  Rng rng(2);
  Policy policy = Policy::initialize(testing::tiny_spec(EncoderKind::mlp), rng, 0.0);
  for (auto& p : policy.parameters()) {
    if (p.name == "pi.log_std") p.value << 10.0, -10.0;
  }
  Mat x = Mat::Zero(1, static_cast<Eigen::Index>(policy.spec().layout.flat_size()));
  const auto d = policy.evaluate(x);
  CHECK(d.log_std(0) == 2.0);
  CHECK(d.log_std(1) == -5.0);
}

TEST_CASE("non-finite network output is a numerical error naming norms") {
  Rng rng(2);
  Policy policy = Policy::initialize(testing::tiny_spec(EncoderKind::mlp), rng, 0.0);
  for (auto& p : policy.parameters()) {
    if (p.name == "pi.b") p.value(0, 0) = std::nan("");
  }
  Mat x = Mat::Zero(1, static_cast<Eigen::Index>(policy.spec().layout.flat_size()));
  try {
    policy.evaluate(x);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("pi.w=") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(13);
  Policy policy = Policy::initialize(default_ss_spec(), rng, -0.7);
  Mat fit(10, static_cast<Eigen::Index>(policy.spec().layout.flat_size()));
  for (Eigen::Index i = 0; i < fit.size(); ++i) fit.data()[i] = rng.normal() * 1e-3 + 1.0 / 3.0;
  policy.fit_normalizer(fit);
  RLConfig cfg;
  cfg.seed = 77;
  cfg.gamma = 0.99;
  Checkpoint ck{cfg, policy, 42, Rng(123)};
  const auto path = std::filesystem::temp_directory_path() / "asrrl_ck_roundtrip.json";
  save_checkpoint(ck, path);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.config == cfg);
  CHECK(back.step == 42);
  CHECK(back.rng == ck.rng);
  CHECK(back.policy.spec() == policy.spec());
  for (std::size_t i = 0; i < policy.parameters().size(); ++i) {
    CHECK(back.policy.parameters()[i].value == policy.parameters()[i].value);
  }
  Rng r1(0), r2(0);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_state(policy.spec().layout, rng);
    CHECK(select_action(policy, s, ActionMode::mode, r1).action ==
          select_action(back.policy, s, ActionMode::mode, r2).action);
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint corruption and version gate") {
  Rng rng(13);
  Policy policy = Policy::initialize(testing::tiny_spec(EncoderKind::mlp), rng, 0.0);
  const std::string text = checkpoint_to_json(Checkpoint{RLConfig{}, policy, 0, Rng(1)});

  const std::string truncated = text.substr(0, text.size() / 2);
  try {
    checkpoint_from_json(truncated);
    FAIL("truncated checkpoint accepted");
  } catch (const CheckpointError& e) {
    CHECK(e.offset() != CheckpointError::npos);
    CHECK(e.offset() <= truncated.size());
  }

  std::string bumped = text;
  const auto pos = bumped.find("\"version\": 1");
  REQUIRE(pos != std::string::npos);
  bumped.replace(pos, 12, "\"version\": 2");
  try {
    checkpoint_from_json(bumped);
    FAIL("future version accepted");
  } catch (const CheckpointError& e) {
    CHECK(e.offset() == pos);
  }

  std::string shrunk = text;
  const auto data = shrunk.find("\"data\": [");
  REQUIRE(data != std::string::npos);
  const auto comma = shrunk.find(',', data);
  shrunk.erase(data + 9, comma - data - 8);  // drop the first element
  CHECK_THROWS_AS(checkpoint_from_json(shrunk), CheckpointError);
}
