#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asrrl/core/action.hpp"
#include "asrrl/core/config.hpp"
#include "asrrl/core/error.hpp"
#include "asrrl/core/numeric_text.hpp"
#include "asrrl/core/rng.hpp"
#include "asrrl/core/state.hpp"

using namespace asrrl;

namespace {

Vector random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("flatten_state concatenates in the fixed order with sep = 0") {
  CHECK(flatten_state(TextFeatures{1, 2}, Embedding{3}).flat() ==
        Vector{1, 2, 0, 3});

  SegmentMask mask;
  mask.prior_voiceprint = true;
  OptionalSegments opt;
  opt.prior_voiceprint = Voiceprint{9};
  CHECK(flatten_state(TextFeatures{1}, Embedding{2}, opt, mask).flat() ==
        Vector{1, 0, 2, 9});

  CHECK_THROWS_AS(flatten_state(TextFeatures{}, Embedding{1}), DimensionError);
}

TEST_CASE("flatten_state names the offending segment") {
  StateLayout layout{2, 2, 3, SegmentMask{}};
  layout.mask.posterior_voiceprint = true;
  OptionalSegments opt;
  opt.posterior_voiceprint = Voiceprint{1, 2};
  try {
    flatten_state(layout, TextFeatures{1, 2}, Embedding{3, 4}, opt);
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("f_sv") != std::string::npos);
  }
  CHECK_THROWS_AS(flatten_state(layout, TextFeatures{1}, Embedding{3, 4}, opt),
                  DimensionError);
}

TEST_CASE("state segments round-trip for every mask") {
  Rng rng(11);
  for (int m = 0; m < 16; ++m) {
    SegmentMask mask;
    mask.text = m & 1;
    mask.prior_voiceprint = m & 2;
    mask.posterior_embedding = m & 4;
    mask.posterior_voiceprint = m & 8;
    const StateLayout layout{3, 4, 2, mask};
    for (int trial = 0; trial < 50; ++trial) {
      const TextFeatures t(random_vector(rng, 3));
      const Embedding e(random_vector(rng, 4));
      OptionalSegments opt;
      if (mask.prior_voiceprint) opt.prior_voiceprint = Voiceprint(random_vector(rng, 2));
      if (mask.posterior_embedding) opt.posterior_embedding = Embedding(random_vector(rng, 4));
      if (mask.posterior_voiceprint) opt.posterior_voiceprint = Voiceprint(random_vector(rng, 2));
      const auto s = flatten_state(layout, t, e, opt);
      REQUIRE(s.size() == layout.flat_size());
      std::size_t expected = 1 + 4 + (mask.text ? 3 : 0) +
                             (mask.prior_voiceprint ? 2 : 0) +
                             (mask.posterior_embedding ? 4 : 0) +
                             (mask.posterior_voiceprint ? 2 : 0);
      CHECK(s.size() == expected);
      auto same = [](std::span<const double> a, const auto& b) {
        return std::equal(a.begin(), a.end(), b.begin(), b.end());
      };
      if (mask.text) CHECK(same(s.segment(SegmentKind::text), t));
      CHECK(s.segment(SegmentKind::separator)[0] == 0.0);
      CHECK(s.embedding() == e);
      if (mask.prior_voiceprint) {
        CHECK(same(s.segment(SegmentKind::prior_voiceprint), *opt.prior_voiceprint));
      } else {
        CHECK_THROWS_AS(s.segment(SegmentKind::prior_voiceprint), DimensionError);
      }
      if (mask.posterior_embedding) {
        CHECK(same(s.segment(SegmentKind::posterior_embedding), *opt.posterior_embedding));
      }
      if (mask.posterior_voiceprint) {
        CHECK(same(s.segment(SegmentKind::posterior_voiceprint), *opt.posterior_voiceprint));
      }
    }
  }
}

TEST_CASE("apply_ss moves each coordinate by scale * delta") {
  const Embedding e{0.1, 0.2};
  const auto out = apply_ss(e, RefinementAction{{1, -1}}, 0.001);
  CHECK(out[0] == doctest::Approx(0.101).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(0.199).epsilon(1e-15));
  CHECK(apply_ss(e, RefinementAction{{0, 0}}, 0.001) == e);

  CHECK_THROWS_AS(apply_ss(e, RefinementAction{{NAN, 0}}, 0.001), ActionError);
  CHECK_THROWS_AS(apply_ss(e, RefinementAction{{1.5, 0}}, 0.001), ActionError);
  CHECK_THROWS_AS(apply_ss(e, RefinementAction{{0, 0}}, 0.0), ActionError);
  CHECK_THROWS_AS(apply_ss(e, RefinementAction{{0}}, 0.001), DimensionError);
}

TEST_CASE("apply_ss: movement bound and additivity") {
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const Embedding e(random_vector(rng, 8));
    Vector d1(8), d2(8);
    for (std::size_t j = 0; j < 8; ++j) {
      d1[j] = rng.uniform() - 0.5;
      d2[j] = rng.uniform() - 0.5;
    }
    Vector sum(8);
    for (std::size_t j = 0; j < 8; ++j) sum[j] = d1[j] + d2[j];
    const auto out = apply_ss(e, RefinementAction{sum}, 0.001);
    CHECK(linf_distance(out.span(), e.span()) <= 0.001);
    for (std::size_t j = 0; j < 8; ++j) {
      CHECK(out[j] == e[j] + 0.001 * (d1[j] + d2[j]));
    }
  }
}

TEST_CASE("fuse_fs examples") {
  const std::vector<Embedding> one{{0.3, -0.7}};
  const auto r1 = fuse_fs(one, FusionAction{{42.0}});
  CHECK(r1.weights == Vector{1.0});
  CHECK(r1.fused == one[0]);

  const std::vector<Embedding> three{{1, 0}, {0, 1}, {1, 1}};
  const auto r3 = fuse_fs(three, FusionAction{{0.5, 0.5, 0.5}});
  CHECK(r3.fused[0] == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(r3.fused[1] == doctest::Approx(2.0 / 3).epsilon(1e-15));

  const std::vector<Embedding> two{{1, 0}, {0, 1}};
  const auto r2 = fuse_fs(two, FusionAction{{std::log(2.0), 0.0}});
  CHECK(r2.weights[0] == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(r2.weights[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(r2.fused[0] == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(r2.fused[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));

  CHECK_THROWS_AS(fuse_fs({}, FusionAction{{}}), DimensionError);
  const std::vector<Embedding> mixed{{1, 0}, {1}};
  CHECK_THROWS_AS(fuse_fs(mixed, FusionAction{{0, 0}}), DimensionError);
  CHECK_THROWS_AS(fuse_fs(two, FusionAction{{0}}), DimensionError);
}

TEST_CASE("mean_init examples and equivalence with uniform fusion") {
  const std::vector<Embedding> refs{{1, 3}, {3, 5}};
  CHECK(mean_init(refs) == Embedding{2, 4});
  const std::vector<Embedding> one{{0.25, -1}};
  CHECK(mean_init(one) == one[0]);
  CHECK_THROWS_AS(mean_init({}), DimensionError);

  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const std::size_t k = 1 + rng.uniform_index(6);
    std::vector<Embedding> r;
    for (std::size_t j = 0; j < k; ++j) r.emplace_back(random_vector(rng, 5));
    CHECK(mean_init(r) == fuse_fs(r, FusionAction{Vector(k, 0.0)}).fused);
  }
}

TEST_CASE("fuse_fs properties: permutation, convexity, shift invariance") {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 1 + rng.uniform_index(6);
    const std::size_t d = 1 + rng.uniform_index(5);
    std::vector<Embedding> refs;
    for (std::size_t j = 0; j < k; ++j) refs.emplace_back(random_vector(rng, d));
    const Vector logits = random_vector(rng, k, 3.0);
    const auto base = fuse_fs(refs, FusionAction{logits});

    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t j = k; j > 1; --j) std::swap(perm[j - 1], perm[rng.uniform_index(j)]);
    std::vector<Embedding> pr;
    Vector pl;
    for (auto p : perm) {
      pr.push_back(refs[p]);
      pl.push_back(logits[p]);
    }
    CHECK(fuse_fs(pr, FusionAction{pl}).fused == base.fused);

    for (std::size_t c = 0; c < d; ++c) {
      double lo = refs[0][c], hi = refs[0][c];
      for (const auto& r : refs) {
        lo = std::min(lo, r[c]);
        hi = std::max(hi, r[c]);
      }
      CHECK(base.fused[c] >= lo);
      CHECK(base.fused[c] <= hi);
    }

    const double shift = 10.0 * rng.normal();
    Vector shifted = logits;
    for (auto& x : shifted) x += shift;
    const auto moved = fuse_fs(refs, FusionAction{shifted});
    for (std::size_t c = 0; c < d; ++c) {
      CHECK(std::abs(moved.fused[c] - base.fused[c]) <= 1e-12);
    }
  }
}

TEST_CASE("RLConfig defaults and key/value round trip") {
  const RLConfig c;
  CHECK(c.gamma == 0.3);
  CHECK(c.lambda1 == 0.5);
  CHECK(c.lambda2 == 0.1);
  CHECK(c.steps_ss == 3);
  CHECK(c.steps_fs == 1);
  CHECK(c.action_scale == 0.001);
  CHECK(c.clip_epsilon == 0.2);
  CHECK(c.gae_lambda == 0.95);
  CHECK(c.learning_rate == 3e-4);
  CHECK(c.update_epochs == 4);
  CHECK(c.rollout_batch == 256);

  RLConfig d;
  d.gamma = 0.99;
  d.seed = 12345678901234ULL;
  d.encoder = EncoderKind::mlp;
  RLConfig e;
  for (const auto& [k, v] : d.to_map()) e.set(k, v);
  CHECK(e == d);

  CHECK_THROWS_AS(e.set("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(e.set("gamma", "abc"), ConfigError);
  RLConfig bad;
  bad.gamma = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("numbers print in shortest round-trip form") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.normal() * std::pow(10.0, rng.normal() * 5);
    CHECK(parse_double(format_double(x)) == x);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(0.807) == "0.807");
}

TEST_CASE("rng substreams are deterministic and independent by name") {
  Rng a = Rng::substream(7, "corpus");
  Rng b = Rng::substream(7, "corpus");
  Rng c = Rng::substream(7, "rollout");
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
  CHECK(Rng::from_state_hex(a.state_hex()) == a);
}
