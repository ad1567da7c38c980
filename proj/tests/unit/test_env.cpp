#include <doctest.h>

#include <cmath>

#include "asrrl/core/error.hpp"
#include "asrrl/env/environment.hpp"
#include "asrrl/env/oracle.hpp"
#include "asrrl/env/synthetic_scorers.hpp"

using namespace asrrl;
using namespace asrrl::env;

namespace {

std::shared_ptr<const VoiceModel> model(std::size_t d_e, std::size_t d_t,
                                        std::uint64_t seed = 1,
                                        double radius = 0.0) {
  auto p = VoiceSpaceParams::defaults_for(d_e, d_t);
  p.radius = radius;
  return std::make_shared<const VoiceModel>(p, seed);
}

EpisodeSettings settings(Scenario scenario = Scenario::single_sentence) {
  return EpisodeSettings::from_config(RLConfig{}, scenario);
}

SpeakerProfile profile_at(const VoiceModel& m, Embedding star,
                          std::vector<Embedding> refs) {
  SpeakerProfile p;
  p.true_embedding = star;
  p.refs = std::move(refs);
  p.target_voiceprint = m.target_voiceprint(star);
  return p;
}

Embedding random_embedding(Rng& rng, std::size_t d, double scale) {
  Embedding e(d);
  for (std::size_t i = 0; i < d; ++i) e[i] = scale * rng.normal();
  return e;
}

TextFeatures random_text(Rng& rng, std::size_t d) {
  TextFeatures t(d);
  for (std::size_t i = 0; i < d; ++i) t[i] = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("voice model matrices are a pure function of the seed") {
  const auto a = model(4, 3, 9);
  const auto b = model(4, 3, 9);
  const auto c = model(4, 3, 10);
  CHECK(a->text_weights() == b->text_weights());
  CHECK(a->embedding_weights() == b->embedding_weights());
  CHECK(a->voiceprint_projection() == b->voiceprint_projection());
  CHECK(a->calibration_text() == b->calibration_text());
  CHECK(a->embedding_weights() != c->embedding_weights());
}

TEST_CASE("synth is deterministic, bounded, and matches its definition") {
  const auto m = model(4, 3);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto t = random_text(rng, 3);
    const auto e = random_embedding(rng, 4, 3.0);
    const auto s = m->synth(t, e);
    CHECK(s == m->synth(t, e));
    Eigen::Map<const Eigen::VectorXd> tv(t.span().data(), 3), ev(e.span().data(), 4);
    const Eigen::VectorXd ref =
        (m->text_weights() * tv + m->embedding_weights() * ev + m->bias())
            .array()
            .tanh();
    for (std::size_t j = 0; j < s.size(); ++j) {
      CHECK(std::abs(s[j]) <= 1.0);
      CHECK(s[j] == doctest::Approx(ref(static_cast<Eigen::Index>(j))).epsilon(1e-14));
    }
  }
  CHECK_THROWS_AS(m->synth(TextFeatures(2), Embedding(4)), DimensionError);
  CHECK_THROWS_AS(m->synth(TextFeatures(3), Embedding(5)), DimensionError);
}

TEST_CASE("e* on the calibration text reproduces the target and scores sim 1") {
  const auto m = model(4, 3, 1, 1.0);
  Rng rng(3);
  const Embedding star = random_embedding(rng, 4, 0.05);
  const auto p = profile_at(*m, star, {star});
  CHECK(m->voiceprint(m->synth(m->calibration_text(), star)) == p.target_voiceprint);
  const auto s = m->score(m->calibration_text(), star, p.target_voiceprint);
  CHECK(s.sim == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.mos == 5.0);
  CHECK(s.intell == 0.0);
}

TEST_CASE("quality and intelligibility penalties follow the norm shell") {
  const auto m = model(2, 2, 1, 1.0);
  CHECK(m->radius() == 1.0);
  CHECK(m->quality(Embedding{0.6, 0.8}) == 5.0);
  CHECK(m->intelligibility_error(Embedding{0.6, 0.8}) == 0.0);
  // ||e|| = 2: one unit past the radius
  CHECK(m->quality(Embedding{0, 2}) == doctest::Approx(5.0 * std::exp(-1.0)).epsilon(1e-15));
  CHECK(m->intelligibility_error(Embedding{2, 0}) ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  CHECK(m->similarity(Voiceprint(m->params().d_v, 0.0), Voiceprint(m->params().d_v, 1.0)) == 0.5);
}

TEST_CASE("default radius is 1.5 E||e*||") {
  const auto p = VoiceSpaceParams::defaults_for(16, 8);
  CHECK(p.quality_radius() == doctest::Approx(1.5 * p.expected_speaker_norm()));
  // chi mean with r degrees of freedom, scaled by sigma
  const double r = static_cast<double>(p.speaker_rank);
  const double chi = std::sqrt(2.0) * std::tgamma((r + 1) / 2) / std::tgamma(r / 2);
  CHECK(p.expected_speaker_norm() == doctest::Approx(p.speaker_sigma * chi).epsilon(1e-12));
}

TEST_CASE("score ranges hold for random embeddings") {
  Rng rng(4);
  for (auto scale : {0.01, 0.1, 1.0, 10.0}) {
    const auto m = model(6, 4, 5);
    SyntheticVoiceEnv voice(m, settings());
    const auto p = profile_at(*m, random_embedding(rng, 6, 0.05), {Embedding(6)});
    auto trade = make_tradeoff_env(7, 6, 0.1, 4, settings());
    for (int i = 0; i < 25000; ++i) {
      const auto t = random_text(rng, 4);
      const auto e = random_embedding(rng, 6, scale);
      for (const Environment* env : {static_cast<const Environment*>(&voice),
                                     static_cast<const Environment*>(trade.get())}) {
        const auto s = env->score_state(p, t, e);
        REQUIRE(s.sim >= 0.0);
        REQUIRE(s.sim <= 1.0);
        REQUIRE(s.mos >= 0.0);
        REQUIRE(s.mos <= 5.0);
        REQUIRE(s.intell >= 0.0);
        REQUIRE(s.intell <= 1.0);
      }
    }
  }
}

TEST_CASE("e* beats every point of a 41x41 grid") {
  const auto m = model(2, 2, 11, 2.0);
  SyntheticVoiceEnv env(m, settings());
  const Embedding star{0.3, -0.2};
  const auto p = profile_at(*m, star, {star});
  const auto& calib = m->calibration_text();
  const double best = env.fused_score(p, calib, star);
  CHECK(best == doctest::Approx(1.5));
  for (int i = 0; i <= 40; ++i) {
    for (int j = 0; j <= 40; ++j) {
      const Embedding e{-1.0 + 0.05 * i, -1.0 + 0.05 * j};
      CHECK(env.fused_score(p, calib, e) <= best);
    }
  }
}

TEST_CASE("synthetic scorers composed with fuse_scores equal the env score") {
  const auto m = model(5, 3, 2, 1.0);
  SyntheticVoiceEnv builtin(m, settings());
  SyntheticVoiceEnv plugged(m, settings());
  plugged.set_scorers(synthetic_scorers(m));
  Rng rng(6);
  const auto p = profile_at(*m, random_embedding(rng, 5, 0.05), {Embedding(5)});
  for (int i = 0; i < 2000; ++i) {
    const auto t = random_text(rng, 3);
    const auto e = random_embedding(rng, 5, 0.2);
    CHECK(std::abs(plugged.fused_score(p, t, e) - builtin.fused_score(p, t, e)) <= 1e-12);
  }
  const auto s = m->synth(m->calibration_text(), p.true_embedding);
  const scoring::ScoreContext ctx{p.target_voiceprint, 0, p.true_embedding};
  CHECK(SimilarityScorer(m).score(s, ctx) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(QualityScorer(m).score(s, ctx) == 5.0);
}

TEST_CASE("reset places the state at refs[0] (SS) or the reference mean (FS)") {
  const auto m = model(2, 2);
  SyntheticVoiceEnv ss(m, settings());
  SyntheticVoiceEnv fs(m, settings(Scenario::few_sentence));
  const auto one = profile_at(*m, Embedding{0.4, 0.1}, {Embedding{0.4, 0.2}});
  const auto two = profile_at(*m, Embedding{2, 4}, {Embedding{1, 3}, Embedding{3, 5}});
  const TextFeatures t{0.5, -0.5};

  const auto s0 = ss.reset(one, t);
  CHECK(s0.embedding() == one.refs[0]);
  CHECK(ss.step_index() == 0);
  CHECK(ss.initial_fused() == ss.fused_score(one, t, one.refs[0]));
  CHECK(ss.reset(one, t) == s0);

  CHECK(fs.reset(two, t).embedding() == Embedding{2, 4});

  CHECK_THROWS_AS(ss.reset(two, t), EpisodeError);
  CHECK_THROWS_AS(fs.reset(one, t), EpisodeError);
}

TEST_CASE("step: zero actions pay nothing, budgets end episodes, misuse is refused") {
  const auto m = model(2, 2);
  SyntheticVoiceEnv ss(m, settings());
  SyntheticVoiceEnv fs(m, settings(Scenario::few_sentence));
  const auto one = profile_at(*m, Embedding{0.04, 0.01}, {Embedding{0.05, 0.02}});
  const auto three = profile_at(
      *m, Embedding{0.0, 0.0},
      {Embedding{0.01, 0.03}, Embedding{0.03, -0.05}, Embedding{-0.02, 0.01}});
  const TextFeatures t{0.5, -0.5};

  ss.reset(one, t);
  for (int i = 1; i <= 3; ++i) {
    const auto tr = ss.step(RefinementAction{{0.0, 0.0}});
    CHECK(tr.reward == 0.0);
    CHECK(tr.done == (i == 3));
  }
  CHECK_THROWS_AS(ss.step(RefinementAction{{0.0, 0.0}}), EpisodeError);

  ss.reset(one, t);
  CHECK_THROWS_AS(ss.step(FusionAction{{0.0}}), EpisodeError);

  fs.reset(three, t);
  const auto tr = fs.step(FusionAction{{0.7, 0.7, 0.7}});
  CHECK(tr.reward == 0.0);
  CHECK(tr.done);
  CHECK_THROWS_AS(fs.step(FusionAction{{0.0, 0.0, 0.0}}), EpisodeError);
}

TEST_CASE("episodes telescope and FS pays fused(e_fusion) - fused(mean)") {
  const auto m = model(3, 2, 8);
  SyntheticVoiceEnv ss(m, settings());
  SyntheticVoiceEnv fs(m, settings(Scenario::few_sentence));
  Rng rng(12);
  for (int i = 0; i < 300; ++i) {
    const auto star = random_embedding(rng, 3, 0.05);
    std::vector<Embedding> refs;
    for (int k = 0; k < 3; ++k) {
      auto r = star;
      for (std::size_t j = 0; j < 3; ++j) r[j] += 0.05 * rng.normal();
      refs.push_back(r);
    }
    const auto p = profile_at(*m, star, refs);
    const auto t = random_text(rng, 2);

    std::vector<Action> acts;
    for (int s = 0; s < 3; ++s) {
      Vector d(3);
      for (auto& x : d) x = 2 * rng.uniform() - 1;
      acts.emplace_back(RefinementAction{d});
    }
    const auto trace = run_episode(ss, p.with_refs(1), t, acts);
    CHECK(trace.well_formed());
    CHECK(trace.steps.size() == 3);
    CHECK(std::abs(trace.total_reward() - (trace.final_fused() - trace.initial_fused)) <= 1e-9);

    const Vector logits{rng.normal(), rng.normal(), rng.normal()};
    const std::vector<Action> fa{FusionAction{logits}};
    const auto ft = run_episode(fs, p, t, fa);
    CHECK(ft.steps.size() == 1);
    const double direct =
        fs.fused_score(p, t, fuse_fs(refs, FusionAction{logits}).fused) -
        fs.fused_score(p, t, mean_init(refs));
    CHECK(ft.total_reward() == direct);
  }
}

TEST_CASE("traces are bit-identical across runs") {
  Rng rng(13);
  const auto p = [&] {
    const auto m = model(4, 2, 21);
    return profile_at(*m, random_embedding(rng, 4, 0.05), {random_embedding(rng, 4, 0.05)});
  }();
  const TextFeatures t{0.3, 0.9};
  std::vector<Action> acts{RefinementAction{{1, -1, 0.5, 0}},
                           RefinementAction{{0.2, 0.2, -0.9, 1}},
                           RefinementAction{{-1, 0, 0, 0.3}}};
  auto once = [&] {
    SyntheticVoiceEnv env(model(4, 2, 21), settings());
    return run_episode(env, p, t, acts);
  };
  CHECK(once() == once());
}

TEST_CASE("posterior segments follow the latest synthesis") {
  const auto m = model(2, 2);
  auto st = settings();
  st.mask.posterior_embedding = true;
  st.mask.posterior_voiceprint = true;
  st.mask.prior_voiceprint = true;
  st.action_scale = 0.1;
  SyntheticVoiceEnv env(m, st);
  const auto p = profile_at(*m, Embedding{0.04, 0.01}, {Embedding{0.05, 0.02}});
  const TextFeatures t{0.5, -0.5};
  const auto s0 = env.reset(p, t);
  const auto prior = s0.segment(SegmentKind::prior_voiceprint);
  const Vector prior0(prior.begin(), prior.end());
  const auto s1 = env.step(RefinementAction{{1.0, -1.0}}).next_state;
  const auto speech = m->synth(t, env.embedding());
  const auto es = s1.segment(SegmentKind::posterior_embedding);
  const auto fsv = s1.segment(SegmentKind::posterior_voiceprint);
  CHECK(Vector(es.begin(), es.end()) == m->encode(speech).values());
  CHECK(Vector(fsv.begin(), fsv.end()) == m->voiceprint(speech).values());
  const auto prior1 = s1.segment(SegmentKind::prior_voiceprint);
  CHECK(Vector(prior1.begin(), prior1.end()) == prior0);
}

TEST_CASE("oracle: d_e = 1 recovers e* within one grid step") {
  const auto m = model(1, 2, 4, 1.0);
  SyntheticVoiceEnv env(m, settings());
  const auto p = profile_at(*m, Embedding{0.3}, {Embedding{0.25}});
  const auto grid = GridSpec::cube(1, -1.0, 1.0, 0.01);
  CHECK(grid.size() == 201);
  const auto best = oracle_best(env, p, m->calibration_text(), grid);
  CHECK(std::abs(best.embedding[0] - 0.3) <= 0.01 + 1e-12);
  CHECK(best.points == 201);
}

TEST_CASE("oracle: grid validation and tie-breaking") {
  CHECK_THROWS_AS(oracle_best(GridSpec{{}, {}, 0.1}, [](const Embedding&) { return 0.0; }),
                  ConfigError);
  CHECK_THROWS_AS(oracle_best(GridSpec{{1.0}, {0.0}, 0.1},
                              [](const Embedding&) { return 0.0; }),
                  ConfigError);
  try {
    oracle_best(GridSpec::cube(8, -1, 1, 0.01), [](const Embedding&) { return 0.0; });
    FAIL("expected the grid to be refused");
  } catch (const ConfigError& e) {
    // 201^8 points
    CHECK(std::string(e.what()).find("points") != std::string::npos);
  }
  const auto flat = oracle_best(GridSpec::cube(2, -1, 1, 0.5),
                                [](const Embedding&) { return 1.0; });
  CHECK(flat.embedding == Embedding{-1.0, -1.0});
}

TEST_CASE("oracle dominates the raw reference up to grid slack") {
  const auto m = model(2, 2, 17);
  SyntheticVoiceEnv env(m, settings());
  Rng rng(18);
  for (int i = 0; i < 20; ++i) {
    const auto star = random_embedding(rng, 2, 0.05);
    auto ref = star;
    ref[0] += 0.05 * rng.normal();
    ref[1] += 0.05 * rng.normal();
    const auto p = profile_at(*m, star, {ref});
    const auto t = random_text(rng, 2);
    const auto grid = GridSpec::around(ref, 0.003, 0.0002);
    const auto best = oracle_best(env, p, t, grid);
    const double slack = grid_resolution_slack(
        *m, env.settings().weights, grid, min_voiceprint_norm(*m, t, grid));
    CHECK(best.fused + slack >= env.fused_score(p, t, ref));
    // and no point of a finer grid beats it by more than the slack
    const auto fine = oracle_best(env, p, t, GridSpec::around(ref, 0.003, 0.00005));
    CHECK(fine.fused <= best.fused + slack);
  }
}

TEST_CASE("tradeoff environment") {
  const double s = std::sqrt(0.5);
  auto env = make_tradeoff_env(Embedding{s, s}, 0.5, 2, settings());
  const SpeakerProfile p{0, Embedding{0, 0}, {Embedding{0, 0}}, Voiceprint{}};
  const TextFeatures t{0, 0};
  const auto at = [&](double proj) {
    return env->score_state(p, t, Embedding{proj * s, proj * s});
  };
  CHECK(at(0.5).mos == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(at(0.5).intell == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(at(1.5).sim > at(0.5).sim);
  CHECK(at(1.5).mos < at(0.5).mos);
  CHECK(at(0.0).sim == 0.5);
  CHECK(env->score_projection(0.0).sim == 0.5);

  CHECK_THROWS_AS(make_tradeoff_env(Embedding{1, 1}, 0.5, 2, settings()), ConfigError);
  CHECK_THROWS_AS(make_tradeoff_env(Embedding{1, 0}, 0.0, 2, settings()), ConfigError);
  const auto seeded = make_tradeoff_env(3, 5, 0.2, 2, settings());
  CHECK(l2_norm(seeded->direction().span()) == doctest::Approx(1.0).epsilon(1e-12));
}
