#include "asrrl/harness/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "asrrl/core/error.hpp"
#include "asrrl/core/numeric_text.hpp"
#include "asrrl/harness/csv.hpp"
#include "asrrl/scoring/fusion.hpp"

namespace asrrl::harness {

namespace {

struct Evaluated {
  std::vector<RunRow> rows;
  std::vector<VariantSummary> summary;
};

Evaluated train_and_evaluate(const ExperimentSpec& spec, const Corpus& corpus) {
  TrainOptions opts;
  opts.write_files = false;
  const auto trained = train(spec, corpus, opts);
  auto ev = evaluate(trained.checkpoint, spec, corpus, Split::eval);
  return {std::move(ev.rows), std::move(ev.summary)};
}

std::string value_label(SweepAxis axis, double value) {
  return axis == SweepAxis::steps ? std::to_string(std::lround(value))
                                  : format_double(value);
}

}  // namespace

void run_parallel(std::size_t jobs, unsigned threads,
                  const std::function<void(std::size_t)>& task) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = std::min<std::size_t>(threads, jobs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto work = [&] {
    for (std::size_t j; (j = next++) < jobs;) {
      try {
        task(j);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = jobs;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::gamma: return "gamma";
    case SweepAxis::action_scale: return "action_scale";
    case SweepAxis::steps: return "steps";
    case SweepAxis::lambda1: return "lambda1";
    case SweepAxis::lambda2: return "lambda2";
  }
  return "?";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  for (auto a : {SweepAxis::gamma, SweepAxis::action_scale, SweepAxis::steps,
                 SweepAxis::lambda1, SweepAxis::lambda2}) {
    if (text == to_string(a)) return a;
  }
  throw ConfigError("unknown sweep axis '" + std::string(text) +
                    "' (expected gamma, action_scale, steps, lambda1 or "
                    "lambda2)");
}

void apply_axis(ExperimentSpec& spec, SweepAxis axis, double value) {
  auto& c = spec.config;
  switch (axis) {
    case SweepAxis::gamma: c.gamma = value; break;
    case SweepAxis::action_scale: c.action_scale = value; break;
    case SweepAxis::lambda1: c.lambda1 = value; break;
    case SweepAxis::lambda2: c.lambda2 = value; break;
    case SweepAxis::steps: {
      if (!(value >= 1.0) || value != std::floor(value)) {
        throw ConfigError("sweep: steps values must be positive integers, got " +
                          format_double(value));
      }
      (spec.scenario == Scenario::single_sentence ? c.steps_ss : c.steps_fs) =
          static_cast<int>(value);
      break;
    }
  }
}

std::vector<std::string> sweep_header() {
  auto h = run_row_header();
  h.insert(h.begin(), {"axis", "value"});
  return h;
}

std::vector<std::string> sweep_summary_header() {
  auto h = summary_header();
  h.insert(h.begin(), {"axis", "value"});
  return h;
}

SweepResult sweep(const ExperimentSpec& spec, const Corpus& corpus,
                  SweepAxis axis, const std::vector<double>& values,
                  const SweepOptions& options) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (values[i] == values[j]) {
        throw ConfigError("sweep: duplicate value " + format_double(values[i]) +
                          " on axis " + std::string(to_string(axis)));
      }
    }
  }
  std::vector<ExperimentSpec> specs;
  for (double v : values) {
    ExperimentSpec s = spec;
    apply_axis(s, axis, v);
    s.run_id = spec.run_id + "-" + std::string(to_string(axis)) + "=" +
               value_label(axis, v);
    s.validate();
    specs.push_back(std::move(s));
  }

  SweepResult result;
  result.axis = axis;
  result.points.resize(values.size());
  run_parallel(values.size(), options.threads, [&](std::size_t i) {
    spdlog::info("sweep {} = {}: training", to_string(axis),
                 value_label(axis, values[i]));
    auto ev = train_and_evaluate(specs[i], corpus);
    result.points[i] = {values[i], std::move(ev.rows), std::move(ev.summary)};
  });

  if (options.write_files) {
    std::filesystem::create_directories(spec.out_dir);
    const std::string stem = "sweep_" + std::string(to_string(axis));
    CsvWriter rows(spec.out_dir / (stem + ".csv"), sweep_header());
    CsvWriter summary(spec.out_dir / (stem + "_summary.csv"),
                      sweep_summary_header());
    for (const auto& p : result.points) {
      const std::vector<std::string> key{std::string(to_string(axis)),
                                         value_label(axis, p.value)};
      for (const auto& r : p.rows) {
        auto f = run_row_fields(r);
        f.insert(f.begin(), key.begin(), key.end());
        rows.write(f);
      }
      for (const auto& s : p.summary) {
        auto f = summary_fields(s);
        f.insert(f.begin(), key.begin(), key.end());
        summary.write(f);
      }
    }
  }
  return result;
}

std::string_view to_string(AblationMode mode) {
  return mode == AblationMode::score_terms ? "score_terms" : "state_segments";
}

AblationMode parse_ablation_mode(std::string_view text) {
  if (text == "score_terms") return AblationMode::score_terms;
  if (text == "state_segments") return AblationMode::state_segments;
  throw ConfigError("unknown ablation mode '" + std::string(text) +
                    "' (expected score_terms or state_segments)");
}

std::vector<AblationVariant> ablation_variants(const ExperimentSpec& spec,
                                               AblationMode mode) {
  std::vector<AblationVariant> out;
  if (mode == AblationMode::score_terms) {
    struct Terms {
      const char* label;
      bool mos, intell;
    };
    for (auto t : {Terms{"full", true, true}, Terms{"intell_only", false, true},
                   Terms{"mos_only", true, false},
                   Terms{"sim_only", false, false}}) {
      ExperimentSpec s = spec;
      s.env = EnvKind::tradeoff;
      s.mask = SegmentMask{};
      s.config.enable_mos = t.mos;
      s.config.enable_intell = t.intell;
      s.run_id = spec.run_id + "-" + t.label;
      out.push_back({t.label, std::move(s)});
    }
    return out;
  }
  // prior subsets of {f_rv, f_t} x posterior subsets of {e_s, f_sv}
  for (int prior = 0; prior < 4; ++prior) {
    for (int post = 0; post < 4; ++post) {
      ExperimentSpec s = spec;
      s.mask.prior_voiceprint = prior & 1;
      s.mask.text = prior & 2;
      s.mask.posterior_embedding = post & 1;
      s.mask.posterior_voiceprint = post & 2;
      auto names = [](std::initializer_list<std::pair<bool, const char*>> on) {
        std::string n;
        for (auto [b, name] : on) {
          if (!b) continue;
          if (!n.empty()) n += "+";
          n += name;
        }
        return n.empty() ? std::string("none") : n;
      };
      std::string label =
          "prior=" + names({{s.mask.prior_voiceprint, "f_rv"},
                            {s.mask.text, "f_t"}}) +
          ";post=" + names({{s.mask.posterior_embedding, "e_s"},
                            {s.mask.posterior_voiceprint, "f_sv"}});
      s.run_id = spec.run_id + "-" + label;
      out.push_back({std::move(label), std::move(s)});
    }
  }
  return out;
}

std::vector<std::string> ablation_header() {
  return {"mode", "label", "seed",   "speaker", "episodes",
          "sim",  "mos",   "intell", "fused"};
}

std::vector<std::string> ablation_fields(const AblationRow& r) {
  return {r.mode,
          r.label,
          std::to_string(r.seed),
          std::to_string(r.speaker),
          std::to_string(r.episodes),
          format_double(r.score.sim),
          format_double(r.score.mos),
          format_double(r.score.intell),
          format_double(r.fused)};
}

AblationRow parse_ablation_row(const std::vector<std::string>& f) {
  if (f.size() != ablation_header().size()) {
    throw IoError("ablation row has " + std::to_string(f.size()) + " fields");
  }
  AblationRow r;
  try {
    r.mode = f[0];
    r.label = f[1];
    r.seed = parse_u64(f[2], "seed");
    r.speaker = parse_u64(f[3], "speaker");
    r.episodes = parse_u64(f[4], "episodes");
    r.score = {parse_double(f[5], "sim"), parse_double(f[6], "mos"),
               parse_double(f[7], "intell")};
    r.fused = parse_double(f[8], "fused");
  } catch (const ConfigError& e) {
    throw IoError(std::string("ablation row: ") + e.what());
  }
  return r;
}

std::vector<AblationRow> ablate(const ExperimentSpec& spec,
                                const Corpus& corpus, AblationMode mode,
                                const AblationOptions& options) {
  const auto variants = ablation_variants(spec, mode);
  for (const auto& v : variants) v.spec.validate();
  scoring::RewardWeights full = scoring::RewardWeights::from_config(spec.config);
  full.enable_mos = full.enable_intell = true;

  std::vector<std::vector<AblationRow>> per(variants.size());
  run_parallel(variants.size(), options.threads, [&](std::size_t i) {
    spdlog::info("ablate {} {}: training", to_string(mode), variants[i].label);
    const auto ev = train_and_evaluate(variants[i].spec, corpus);
    // speakers in order of first appearance
    std::vector<std::uint64_t> order;
    std::map<std::uint64_t, std::vector<ScoreTriple>> by;
    for (const auto& r : ev.rows) {
      if (r.variant != "rl") continue;
      if (!by.count(r.speaker)) order.push_back(r.speaker);
      by[r.speaker].push_back(r.score);
    }
    for (auto id : order) {
      const auto& scores = by[id];
      ScoreTriple m;
      for (const auto& s : scores) {
        m.sim += s.sim;
        m.mos += s.mos;
        m.intell += s.intell;
      }
      const double n = static_cast<double>(scores.size());
      m = {m.sim / n, m.mos / n, m.intell / n};
      per[i].push_back({std::string(to_string(mode)), variants[i].label,
                        spec.config.seed, id, scores.size(), m,
                        scoring::fuse_scores(m, full)});
    }
  });

  std::vector<AblationRow> rows;
  for (auto& p : per) rows.insert(rows.end(), p.begin(), p.end());
  if (options.write_files) {
    std::filesystem::create_directories(spec.out_dir);
    CsvWriter w(spec.out_dir / ("ablation_" + std::string(to_string(mode)) +
                                ".csv"),
                ablation_header());
    for (const auto& r : rows) w.write(ablation_fields(r));
  }
  return rows;
}

}  // namespace asrrl::harness
