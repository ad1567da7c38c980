#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "asrrl/core/error.hpp"
#include "asrrl/env/oracle.hpp"
#include "asrrl/harness/corpus.hpp"
#include "asrrl/harness/csv.hpp"
#include "asrrl/harness/experiment.hpp"
#include "asrrl/harness/stats.hpp"
#include "asrrl/harness/study.hpp"

using namespace asrrl;
using namespace asrrl::harness;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("asrrl-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

Corpus small_corpus(std::uint64_t seed = 3, std::size_t d_e = 4,
                    std::size_t refs = 1, std::size_t speakers = 10) {
  CorpusOptions o;
  o.seed = seed;
  o.speakers = speakers;
  o.refs = refs;
  o.texts_per_speaker = 4;
  o.params = env::VoiceSpaceParams::defaults_for(d_e, 3);
  return gen_corpus(o);
}

// Tiny fast training run.
ExperimentSpec quick_spec() {
  ExperimentSpec s;
  s.config.encoder = EncoderKind::mlp;
  s.config.hidden = 16;
  s.config.layers = 1;
  s.config.rollout_batch = 30;
  s.config.minibatch_size = 15;
  s.config.update_epochs = 2;
  s.config.updates = 4;
  s.config.seed = 5;
  s.eval_texts = 3;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("gen_corpus: counts, determinism and text round trip") {
  const auto c = small_corpus(3, 4, 3);
  CHECK(c.speakers.size() == 10);
  for (const auto& s : c.speakers) {
    CHECK(s.profile.refs.size() == 3);
    CHECK(s.texts.size() == 4);
    CHECK(s.profile.target_voiceprint ==
          c.voice_model()->target_voiceprint(s.profile.true_embedding));
  }
  const std::string text = corpus_to_text(c);
  CHECK(text == corpus_to_text(small_corpus(3, 4, 3)));
  CHECK(text != corpus_to_text(small_corpus(4, 4, 3)));
  CHECK(text.rfind("ASRRL-CORPUS v1 d_e=4 d_t=3 seed=3", 0) == 0);
  CHECK(corpus_from_text(text) == c);
}

TEST_CASE("corpus files: refuse overwrite, byte-identical rewrites, bad input") {
  TempDir tmp;
  const auto c = small_corpus();
  const auto a = tmp.path / "a.txt";
  const auto b = tmp.path / "b.txt";
  write_corpus(c, a, false);
  CHECK_THROWS_AS(write_corpus(c, a, false), IoError);
  write_corpus(c, a, true);
  write_corpus(small_corpus(), b, false);
  CHECK(slurp(a) == slurp(b));
  CHECK(read_corpus(a) == c);

  const std::string text = slurp(a);
  CHECK_THROWS_AS(corpus_from_text(text.substr(0, text.size() / 2)), IoError);
  CHECK_THROWS_AS(corpus_from_text("ASRRL-CORPUS v2 d_e=1\n"), IoError);
  CHECK_THROWS_AS(read_corpus(tmp.path / "missing.txt"), IoError);
}

TEST_CASE("reference noise has the chi-distribution mean distance") {
  CorpusOptions o;
  o.seed = 8;
  o.speakers = 1000;
  o.texts_per_speaker = 1;
  o.params = env::VoiceSpaceParams::defaults_for(16, 4);
  const auto c = gen_corpus(o);
  double total = 0;
  for (const auto& s : c.speakers) {
    double d2 = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      const double d = s.profile.refs[0][i] - s.profile.true_embedding[i];
      d2 += d * d;
    }
    total += std::sqrt(d2);
  }
  const double mean = total / 1000.0;
  const double expect = o.params.ref_sigma * std::sqrt(16.0);
  CHECK(mean >= 0.8 * expect);
  CHECK(mean <= 1.2 * expect);
}

TEST_CASE("train and eval splits are disjoint and cover the corpus") {
  for (std::size_t n : {2u, 5u, 10u, 50u, 51u}) {
    for (double f : {0.0, 0.1, 0.2, 0.5, 0.9}) {
      const auto tr = split_indices(n, f, Split::train);
      const auto ev = split_indices(n, f, Split::eval);
      CHECK_FALSE(tr.empty());
      CHECK_FALSE(ev.empty());
      std::set<std::size_t> all(tr.begin(), tr.end());
      for (auto i : ev) CHECK(all.insert(i).second);
      CHECK(all.size() == n);
    }
  }
  CHECK(split_indices(50, 0.2, Split::eval).size() == 10);
}

TEST_CASE("csv: RFC 4180 quoting round-trips") {
  const std::vector<std::string> row{"plain", "a,b", "say \"hi\"", "two\nlines", ""};
  const std::string rec = csv_record(row);
  CHECK(rec == "plain,\"a,b\",\"say \"\"hi\"\"\",\"two\nlines\",\r\n");
  const auto back = parse_csv(rec + csv_record({"x", "y", "z", "w", "v"}));
  REQUIRE(back.size() == 2);
  CHECK(back[0] == row);
}

TEST_CASE("summaries recomputed from the CSV match the emitted summary") {
  TempDir tmp;
  Rng rng(4);
  std::vector<RunRow> rows;
  for (int i = 0; i < 300; ++i) {
    RunRow r;
    r.run_id = "x";
    r.variant = i % 3 == 0 ? "raw" : (i % 3 == 1 ? "rl" : "oracle");
    r.score = {rng.uniform(), 5 * rng.uniform(), rng.uniform()};
    r.fused = r.score.sim + 0.1 * r.score.mos - 0.1 * r.score.intell;
    r.episode = static_cast<std::uint64_t>(i);
    rows.push_back(r);
  }
  write_run_rows(tmp.path / "rows.csv", rows);
  write_summary(tmp.path / "summary.csv", summarize(rows));
  const auto reread = read_run_rows(tmp.path / "rows.csv");
  CHECK(reread.size() == rows.size());
  const auto again = summarize(reread);
  const auto table = read_csv(tmp.path / "summary.csv");
  REQUIRE(table.size() == 4);
  for (std::size_t v = 0; v < 3; ++v) {
    const auto& f = table[v + 1];
    CHECK(f[0] == again[v].variant);
    CHECK(std::stoul(f[1]) == 100);
    CHECK(std::abs(std::stod(f[2]) - again[v].sim.mean) <= 1e-9);
    CHECK(std::abs(std::stod(f[3]) - again[v].sim.std) <= 1e-9);
    CHECK(std::abs(std::stod(f[8]) - again[v].fused.mean) <= 1e-9);
  }
}

TEST_CASE("stats: sample std and one-sided paired t-test") {
  const double xs[] = {1, 2, 3, 4};
  const auto m = mean_std(xs);
  CHECK(m.mean == 2.5);
  CHECK(m.std == doctest::Approx(1.2909944487358056).epsilon(1e-14));
  // scipy.stats.ttest_rel(a, b, alternative="greater")
  const double a[] = {1.2, 0.9, 1.5, 1.1, 1.3};
  const double b[] = {1.0, 1.0, 1.1, 0.9, 1.0};
  const auto t = paired_t_test(a, b);
  CHECK(t.t == doctest::Approx(2.390457218668788).epsilon(1e-12));
  CHECK(t.p_value == doctest::Approx(0.037565227312614836).epsilon(1e-10));
  CHECK(paired_t_test(b, a).p_value == doctest::Approx(1 - 0.037565227312614836).epsilon(1e-10));
}

TEST_CASE("config files and spec keys") {
  const auto kv = parse_config_text("# comment\ngamma = 0.99\n\n mask.f_rv=true # trailing\n");
  REQUIRE(kv.size() == 2);
  CHECK(kv[0] == std::pair<std::string, std::string>{"gamma", "0.99"});
  ExperimentSpec s;
  for (const auto& [k, v] : kv) s.set(k, v);
  CHECK(s.config.gamma == 0.99);
  CHECK(s.mask.prior_voiceprint);
  CHECK_THROWS_AS(s.set("mask.e", "false"), ConfigError);
  CHECK_THROWS_AS(s.set("bogus", "1"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("gamma 0.3\n"), ConfigError);
}

TEST_CASE("finetune proxy") {
  // step_size 0 leaves the start untouched
  const auto flat = finetune_proxy([](const Embedding& e) { return -e[0] * e[0]; },
                                   Embedding{0.7}, 10, 0.0);
  CHECK(flat.embedding == Embedding{0.7});

  const auto nan = [](const Embedding& e) { return e[1] > 0.5 ? NAN : 0.0; };
  try {
    finetune_proxy(nan, Embedding{0.0, 0.5}, 5, 0.1);
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("coordinate 1") != std::string::npos);
  }
  CHECK_THROWS_AS(finetune_proxy(nan, Embedding{0.0, 0.0}, 0, 0.1), ConfigError);
}

TEST_CASE("finetune proxy reaches the d_e = 1 grid optimum") {
  CorpusOptions o;
  o.seed = 2;
  o.speakers = 5;
  o.params = env::VoiceSpaceParams::defaults_for(1, 2);
  const auto c = gen_corpus(o);
  ExperimentSpec spec;
  const auto env = make_environment(spec, c);
  const auto calib = c.voice_model()->calibration_text();
  for (const auto& s : c.speakers) {
    const auto p = scenario_profile(spec, s);
    const auto ft = finetune_proxy(*env, c, p);
    const auto grid = env::GridSpec::around(p.refs[0], 0.5, 1e-4);
    const auto best = env::oracle_best(*env, p, calib, grid);
    CHECK(std::abs(ft.embedding[0] - best.embedding[0]) <= 1e-3);
    CHECK(ft.fused >= ft.initial_fused);
  }
}

TEST_CASE("train writes one CSV row per episode and a loadable checkpoint") {
  TempDir tmp;
  const auto c = small_corpus();
  auto spec = quick_spec();
  spec.out_dir = tmp.path;
  const auto r = train(spec, c);
  // 30 steps / 3 per episode = 10 episodes per update
  CHECK(r.episodes.size() == 40);
  CHECK(read_run_rows(tmp.path / "train.csv").size() == 40);
  const auto ck = agent::load_checkpoint(tmp.path / "checkpoint.json");
  CHECK(ck.step == 4);
  const auto a = evaluate(ck, spec, c);
  const auto b = evaluate(r.checkpoint, spec, c);
  CHECK(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].fused == b.rows[i].fused);
  }
}

TEST_CASE("zero learning rate: evaluation equals the initial policy exactly") {
  const auto c = small_corpus();
  auto spec = quick_spec();
  spec.config.learning_rate = 0.0;
  TrainOptions no_files;
  no_files.write_files = false;
  const auto trained = train(spec, c, no_files);
  auto init = spec;
  init.config.updates = 1;
  const auto start = train(init, c, no_files);
  CHECK(trained.checkpoint.policy.parameters().size() ==
        start.checkpoint.policy.parameters().size());
  const auto a = evaluate(trained.checkpoint, spec, c);
  const auto b = evaluate(start.checkpoint, spec, c);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].score == b.rows[i].score);
  }
}

TEST_CASE("evaluate: raw is the mean of the references under FS; n counts episodes") {
  const auto c = small_corpus(3, 4, 3, 50);
  auto spec = quick_spec();
  spec.scenario = Scenario::few_sentence;
  spec.config.k = 3;
  spec.eval_texts = 10;
  TrainOptions no_files;
  no_files.write_files = false;
  const auto r = train(spec, c, no_files);
  const auto ev = evaluate(r.checkpoint, spec, c);
  const auto env = make_environment(spec, c);
  std::size_t i = 0;
  for (auto idx : split_indices(c.speakers.size(), spec.eval_fraction, Split::eval)) {
    const auto& s = c.speakers[idx];
    for (std::size_t t = 0; t < 4; ++t, ++i) {
      const auto& raw = ev.rows[2 * i];
      REQUIRE(raw.variant == "raw");
      CHECK(raw.fused == env->fused_score(s.profile, s.texts[t], mean_init(s.profile.refs)));
    }
  }
  // 10 held-out speakers x 10 texts, capped by the 4 texts each speaker has
  CHECK(ev.summary.front().fused.n == 40);
}

TEST_CASE("evaluate refuses a checkpoint for other dimensions") {
  const auto c = small_corpus(3, 4);
  auto spec = quick_spec();
  spec.config.updates = 1;
  TrainOptions no_files;
  no_files.write_files = false;
  const auto r = train(spec, c, no_files);
  CHECK_THROWS_AS(evaluate(r.checkpoint, spec, small_corpus(3, 5)), DimensionError);
}

TEST_CASE("oracle sandwich holds at d_e = 2 for the raw embedding") {
  const auto c = small_corpus(6, 2);
  auto spec = quick_spec();
  TrainOptions no_files;
  no_files.write_files = false;
  const auto r = train(spec, c, no_files);
  const auto ev = evaluate(r.checkpoint, spec, c);
  for (std::size_t i = 0; i + 2 < ev.rows.size(); i += 3) {
    REQUIRE(ev.rows[i + 2].variant == "oracle");
    CHECK(ev.rows[i + 2].fused + ev.oracle_slack >= ev.rows[i].fused);
    CHECK(ev.rows[i + 2].fused + ev.oracle_slack >= ev.rows[i + 1].fused);
  }
}

TEST_CASE("divergence guard aborts a run that keeps losing score") {
  const auto c = small_corpus();
  auto spec = quick_spec();
  // huge steps leave the quality shell; a heavy mos weight makes that a loss
  spec.config.action_scale = 10.0;
  spec.config.lambda1 = 5.0;
  spec.config.updates = 50;
  spec.config.learning_rate = 0.0;
  TrainOptions no_files;
  no_files.write_files = false;
  CHECK_THROWS_AS(train(spec, c, no_files), DivergenceError);
}

TEST_CASE("FS runs need k >= 2 references in the corpus") {
  auto spec = quick_spec();
  spec.scenario = Scenario::few_sentence;
  spec.config.k = 3;
  TrainOptions no_files;
  no_files.write_files = false;
  CHECK_THROWS_AS(train(spec, small_corpus(3, 4, 2), no_files), ConfigError);
  spec.config.k = 1;
  CHECK_THROWS_AS(train(spec, small_corpus(3, 4, 2), no_files), ConfigError);
}

TEST_CASE("sweep: duplicates refused, shared seeds, complete CSVs") {
  TempDir tmp;
  const auto c = small_corpus();
  auto spec = quick_spec();
  spec.out_dir = tmp.path;
  CHECK_THROWS_AS(sweep(spec, c, SweepAxis::gamma, {0.3, 0.3}), ConfigError);
  CHECK_THROWS_AS(sweep(spec, c, SweepAxis::gamma, {}), ConfigError);
  CHECK_THROWS_AS(sweep(spec, c, SweepAxis::steps, {1.5}), ConfigError);

  SweepOptions opt;
  opt.threads = 2;
  const auto r = sweep(spec, c, SweepAxis::steps, {1, 2, 3}, opt);
  REQUIRE(r.points.size() == 3);
  // raw rows depend only on the corpus, so they agree across points
  for (const auto& p : r.points) {
    for (std::size_t i = 0; i < p.rows.size(); i += 2) {
      CHECK(p.rows[i].fused == r.points[0].rows[i].fused);
      CHECK(p.rows[i].steps == static_cast<int>(p.value));
    }
  }
  const auto rows = read_csv(tmp.path / "sweep_steps.csv");
  CHECK(rows.front() == sweep_header());
  CHECK(rows.size() == 1 + 3 * r.points[0].rows.size());
  const auto summary = read_csv(tmp.path / "sweep_steps_summary.csv");
  CHECK(summary.size() == 1 + 3 * 2);
}

TEST_CASE("sweep rows do not depend on the thread count") {
  const auto c = small_corpus();
  const auto spec = quick_spec();
  SweepOptions serial, parallel;
  serial.threads = 1;
  serial.write_files = parallel.write_files = false;
  parallel.threads = 3;
  const auto a = sweep(spec, c, SweepAxis::gamma, {0.0, 0.3, 0.9}, serial);
  const auto b = sweep(spec, c, SweepAxis::gamma, {0.0, 0.3, 0.9}, parallel);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t p = 0; p < a.points.size(); ++p) {
    REQUIRE(a.points[p].rows.size() == b.points[p].rows.size());
    for (std::size_t i = 0; i < a.points[p].rows.size(); ++i) {
      CHECK(run_row_fields(a.points[p].rows[i]) == run_row_fields(b.points[p].rows[i]));
    }
  }
}

TEST_CASE("sweep points share their initial weights") {
  const auto c = small_corpus();
  auto spec = quick_spec();
  spec.config.updates = 1;
  spec.config.learning_rate = 0.0;
  TrainOptions no_files;
  no_files.write_files = false;
  auto a = spec, b = spec;
  apply_axis(a, SweepAxis::gamma, 0.0);
  apply_axis(b, SweepAxis::gamma, 0.99);
  const auto pa = train(a, c, no_files).checkpoint.policy.parameters();
  const auto pb = train(b, c, no_files).checkpoint.policy.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].value == pb[i].value);
}

TEST_CASE("ablation variants and row counts") {
  ExperimentSpec spec = quick_spec();
  const auto terms = ablation_variants(spec, AblationMode::score_terms);
  REQUIRE(terms.size() == 4);
  CHECK(terms[3].label == "sim_only");
  CHECK_FALSE(terms[3].spec.config.enable_mos);
  CHECK_FALSE(terms[3].spec.config.enable_intell);
  for (const auto& v : terms) CHECK(v.spec.env == EnvKind::tradeoff);

  const auto segs = ablation_variants(spec, AblationMode::state_segments);
  CHECK(segs.size() == 16);
  std::set<std::string> labels;
  for (const auto& v : segs) labels.insert(v.label);
  CHECK(labels.size() == 16);
  CHECK(labels.count("prior=none;post=none"));
  CHECK(labels.count("prior=f_rv+f_t;post=e_s+f_sv"));

  TempDir tmp;
  spec.out_dir = tmp.path;
  spec.config.action_scale = 0.25;
  const auto c = small_corpus();
  const auto rows = ablate(spec, c, AblationMode::score_terms);
  CHECK(rows.size() == 4 * split_indices(10, 0.2, Split::eval).size());
  const auto table = read_csv(tmp.path / "ablation_score_terms.csv");
  CHECK(table.size() == rows.size() + 1);
  CHECK(parse_ablation_row(table[1]).label == "full");
}
