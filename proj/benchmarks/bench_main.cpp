// Hot paths of a training run: synthesis and scoring, one environment step,
// policy forward passes over a rollout batch, and a full PPO update.

#include <benchmark/benchmark.h>

#include "asrrl/agent/policy.hpp"
#include "asrrl/agent/ppo.hpp"
#include "asrrl/harness/corpus.hpp"
#include "asrrl/harness/experiment.hpp"

using namespace asrrl;

namespace {

const harness::Corpus& corpus() {
  static const harness::Corpus c = [] {
    harness::CorpusOptions o;
    o.seed = 7;
    o.speakers = 20;
    return harness::gen_corpus(o);
  }();
  return c;
}

void BM_Synth(benchmark::State& state) {
  const auto model = corpus().voice_model();
  const auto& rec = corpus().speakers.front();
  for (auto _ : state) {
    benchmark::DoNotOptimize(model->synth(rec.texts.front(), rec.profile.refs[0]));
  }
}
BENCHMARK(BM_Synth);

void BM_ScoreState(benchmark::State& state) {
  harness::ExperimentSpec spec;
  const auto env = harness::make_environment(spec, corpus());
  const auto& rec = corpus().speakers.front();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        env->score_state(rec.profile, rec.texts.front(), rec.profile.refs[0]));
  }
}
BENCHMARK(BM_ScoreState);

void BM_EnvEpisode(benchmark::State& state) {
  harness::ExperimentSpec spec;
  const auto env = harness::make_environment(spec, corpus());
  const auto& rec = corpus().speakers.front();
  const Action a = RefinementAction{Vector(corpus().params.d_e, 0.5)};
  for (auto _ : state) {
    env->reset(rec.profile, rec.texts.front());
    while (!env->done()) benchmark::DoNotOptimize(env->step(a));
  }
}
BENCHMARK(BM_EnvEpisode);

agent::Policy make_policy(EncoderKind encoder) {
  harness::ExperimentSpec spec;
  spec.config.encoder = encoder;
  const auto env = harness::make_environment(spec, corpus());
  Rng rng(1);
  return agent::Policy::initialize(
      agent::PolicySpec::from_config(spec.config, spec.scenario, env->layout()),
      rng);
}

agent::Mat random_states(const agent::Policy& p, Eigen::Index n, Rng& rng) {
  agent::Mat s(n, static_cast<Eigen::Index>(p.spec().layout.flat_size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal();
  return s;
}

void BM_PolicyForward(benchmark::State& state) {
  const auto p = make_policy(static_cast<EncoderKind>(state.range(0)));
  Rng rng(2);
  const agent::Mat s = random_states(p, state.range(1), rng);
  for (auto _ : state) benchmark::DoNotOptimize(p.evaluate(s));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_PolicyForward)
    ->ArgNames({"mlp", "batch"})
    ->Args({static_cast<int>(EncoderKind::sequence), 256})
    ->Args({static_cast<int>(EncoderKind::mlp), 256});

void BM_PpoUpdate(benchmark::State& state) {
  const auto base = make_policy(static_cast<EncoderKind>(state.range(0)));
  Rng rng(3);
  agent::RolloutBatch b;
  b.states = random_states(base, 255, rng);
  const auto samples =
      agent::select_actions(base, b.states, agent::ActionMode::sample, rng);
  b.raw_actions = agent::Mat(255, static_cast<Eigen::Index>(base.spec().action_dim));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = 0; j < samples[i].raw.size(); ++j) {
      b.raw_actions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          samples[i].raw[j];
    }
    b.log_probs.push_back(samples[i].log_prob);
    b.values.push_back(samples[i].value);
    b.rewards.push_back(1e-3 * rng.normal());
    b.dones.push_back(i % 3 == 2);
  }
  const auto g = agent::gae(b.rewards, b.values, b.dones, 0.3, 0.95);
  b.advantages = g.advantages;
  b.returns = g.returns;
  const auto settings = agent::PpoSettings::from_config(RLConfig{});
  for (auto _ : state) {
    state.PauseTiming();
    agent::Policy p = base;
    agent::Adam opt(p);
    Rng shuffle(4);
    state.ResumeTiming();
    benchmark::DoNotOptimize(agent::ppo_update(p, opt, b, settings, shuffle));
  }
}
BENCHMARK(BM_PpoUpdate)
    ->ArgNames({"mlp"})
    ->Arg(static_cast<int>(EncoderKind::sequence))
    ->Arg(static_cast<int>(EncoderKind::mlp))
    ->Unit(benchmark::kMillisecond);

void BM_Gae(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> r(256), v(256);
  std::vector<bool> d(256);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = rng.normal();
    v[i] = rng.normal();
    d[i] = i % 3 == 2;
  }
  for (auto _ : state) benchmark::DoNotOptimize(agent::gae(r, v, d, 0.3, 0.95));
}
BENCHMARK(BM_Gae);

}  // namespace

BENCHMARK_MAIN();
