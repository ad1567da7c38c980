#include "asrrl/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <spdlog/spdlog.h>

#include "asrrl/core/error.hpp"
#include "asrrl/core/numeric_text.hpp"
#include "asrrl/env/oracle.hpp"
#include "asrrl/harness/csv.hpp"

namespace asrrl::harness {

namespace {

constexpr int kDivergenceWindow = 100;
constexpr std::size_t kOracleMaxDim = 3;
constexpr int kOracleAxisCells = 30;

std::shared_ptr<const env::VoiceModel> model_for(const ExperimentSpec& spec,
                                                 const Corpus& corpus) {
  return spec.env == EnvKind::voice ? corpus.voice_model() : nullptr;
}

std::unique_ptr<env::Environment> build_env(
    const ExperimentSpec& spec, const Corpus& corpus,
    const std::shared_ptr<const env::VoiceModel>& model) {
  auto settings =
      env::EpisodeSettings::from_config(spec.config, spec.scenario, spec.mask);
  if (spec.env == EnvKind::voice) {
    return std::make_unique<env::SyntheticVoiceEnv>(model, settings);
  }
  return env::make_tradeoff_env(corpus.seed, corpus.params.d_e,
                                spec.tradeoff_tau, corpus.params.d_t, settings);
}

// Training always adopts the corpus dimensions.
ExperimentSpec adopt_corpus(ExperimentSpec spec, const Corpus& corpus) {
  spec.config.d_e = corpus.params.d_e;
  spec.config.d_t = corpus.params.d_t;
  if (spec.scenario == Scenario::single_sentence) spec.config.k = 1;
  return spec;
}

void check_scenario(const ExperimentSpec& spec, const Corpus& corpus) {
  if (spec.scenario == Scenario::few_sentence) {
    if (spec.config.k < 2) {
      throw ConfigError("FS scenario needs k >= 2 references");
    }
    if (corpus.k_refs() < spec.config.k) {
      throw ConfigError("corpus has " + std::to_string(corpus.k_refs()) +
                        " references per speaker, FS run asks for k = " +
                        std::to_string(spec.config.k));
    }
  }
}

RunRow make_row(const ExperimentSpec& spec, std::uint64_t episode,
                std::uint64_t speaker, const ScoreTriple& score, double fused,
                std::string variant) {
  RunRow r;
  r.run_id = spec.run_id;
  r.scenario = spec.scenario;
  r.k = spec.scenario == Scenario::single_sentence ? 1 : spec.config.k;
  r.gamma = spec.config.gamma;
  r.action_scale = spec.config.action_scale;
  r.steps = spec.config.steps(spec.scenario);
  r.seed = spec.config.seed;
  r.episode = episode;
  r.speaker = speaker;
  r.score = score;
  r.fused = fused;
  r.variant = std::move(variant);
  return r;
}

// Bounding box of what the policy can reach from the reset embedding.
env::GridSpec reachable_grid(const ExperimentSpec& spec,
                             const env::SpeakerProfile& profile,
                             const Embedding& start) {
  env::GridSpec g;
  const std::size_t d = start.size();
  g.lo.resize(d);
  g.hi.resize(d);
  if (spec.scenario == Scenario::single_sentence) {
    const double r = spec.config.action_scale * spec.config.steps_ss;
    for (std::size_t i = 0; i < d; ++i) {
      g.lo[i] = start[i] - r;
      g.hi[i] = start[i] + r;
    }
  } else {
    for (std::size_t i = 0; i < d; ++i) {
      g.lo[i] = g.hi[i] = profile.refs.front()[i];
      for (const auto& ref : profile.refs) {
        g.lo[i] = std::min(g.lo[i], ref[i]);
        g.hi[i] = std::max(g.hi[i], ref[i]);
      }
    }
  }
  double extent = 0.0;
  for (std::size_t i = 0; i < d; ++i) extent = std::max(extent, g.hi[i] - g.lo[i]);
  g.step = extent > 0 ? extent / kOracleAxisCells : 1e-6;
  // make the upper corner land on the grid
  for (std::size_t i = 0; i < d; ++i) g.hi[i] += 1e-12;
  return g;
}

}  // namespace

std::string_view to_string(EnvKind kind) {
  return kind == EnvKind::voice ? "voice" : "tradeoff";
}

EnvKind parse_env_kind(std::string_view text) {
  if (text == "voice") return EnvKind::voice;
  if (text == "tradeoff") return EnvKind::tradeoff;
  throw ConfigError("unknown env '" + std::string(text) +
                    "' (expected voice or tradeoff)");
}

void ExperimentSpec::validate() const {
  config.validate();
  if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) {
    throw ConfigError("eval_fraction must lie in [0, 1)");
  }
  if (eval_texts < 1) throw ConfigError("eval_texts must be >= 1");
  if (env == EnvKind::tradeoff && (mask != SegmentMask{})) {
    throw ConfigError("the tradeoff env supports only the default state mask");
  }
  if (env == EnvKind::tradeoff && !(tradeoff_tau > 0.0)) {
    throw ConfigError("tradeoff_tau must be > 0");
  }
  if (run_id.empty()) throw ConfigError("run_id must not be empty");
}

void ExperimentSpec::set(const std::string& key, const std::string& value) {
  const std::string_view v = trim(value);
  if (key == "scenario") {
    scenario = parse_scenario(v);
  } else if (key == "env") {
    env = parse_env_kind(v);
  } else if (key == "eval_fraction") {
    eval_fraction = parse_double(v, key);
  } else if (key == "eval_texts") {
    eval_texts = parse_u64(v, key);
  } else if (key == "tradeoff_tau") {
    tradeoff_tau = parse_double(v, key);
  } else if (key == "run_id") {
    run_id = std::string(v);
  } else if (key == "mask.text" || key == "mask.f_t") {
    mask.text = parse_bool(v, key);
  } else if (key == "mask.f_rv") {
    mask.prior_voiceprint = parse_bool(v, key);
  } else if (key == "mask.e_s") {
    mask.posterior_embedding = parse_bool(v, key);
  } else if (key == "mask.f_sv") {
    mask.posterior_voiceprint = parse_bool(v, key);
  } else if (key == "mask.e") {
    if (!parse_bool(v, key)) {
      throw ConfigError("the embedding segment e cannot be disabled");
    }
  } else {
    config.set(key, std::string(v));
  }
}

std::vector<std::pair<std::string, std::string>> parse_config_text(
    std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    }
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

void apply_config_file(ExperimentSpec& spec, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  for (const auto& [k, v] : parse_config_text(ss.str())) {
    try {
      spec.set(k, v);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
}

std::vector<std::string> run_row_header() {
  return {"run_id", "scenario", "k",    "gamma",  "action_scale",
          "steps",  "seed",     "episode", "speaker", "sim",
          "mos",    "intell",   "fused", "variant"};
}

std::vector<std::string> run_row_fields(const RunRow& r) {
  return {r.run_id,
          std::string(to_string(r.scenario)),
          std::to_string(r.k),
          format_double(r.gamma),
          format_double(r.action_scale),
          std::to_string(r.steps),
          std::to_string(r.seed),
          std::to_string(r.episode),
          std::to_string(r.speaker),
          format_double(r.score.sim),
          format_double(r.score.mos),
          format_double(r.score.intell),
          format_double(r.fused),
          r.variant};
}

RunRow parse_run_row(const std::vector<std::string>& f) {
  if (f.size() != run_row_header().size()) {
    throw IoError("run record row has " + std::to_string(f.size()) + " fields");
  }
  RunRow r;
  try {
    r.run_id = f[0];
    r.scenario = parse_scenario(f[1]);
    r.k = parse_u64(f[2], "k");
    r.gamma = parse_double(f[3], "gamma");
    r.action_scale = parse_double(f[4], "action_scale");
    r.steps = static_cast<int>(parse_int(f[5], "steps"));
    r.seed = parse_u64(f[6], "seed");
    r.episode = parse_u64(f[7], "episode");
    r.speaker = parse_u64(f[8], "speaker");
    r.score.sim = parse_double(f[9], "sim");
    r.score.mos = parse_double(f[10], "mos");
    r.score.intell = parse_double(f[11], "intell");
    r.fused = parse_double(f[12], "fused");
    r.variant = f[13];
  } catch (const ConfigError& e) {
    throw IoError(std::string("run record: ") + e.what());
  }
  return r;
}

void write_run_rows(const std::filesystem::path& path,
                    const std::vector<RunRow>& rows) {
  CsvWriter w(path, run_row_header());
  for (const auto& r : rows) w.write(run_row_fields(r));
}

std::vector<RunRow> read_run_rows(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  if (table.empty() || table.front() != run_row_header()) {
    throw IoError(path.string() + ": not a run record CSV");
  }
  std::vector<RunRow> rows;
  for (std::size_t i = 1; i < table.size(); ++i) {
    rows.push_back(parse_run_row(table[i]));
  }
  return rows;
}

std::vector<VariantSummary> summarize(const std::vector<RunRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::array<std::vector<double>, 4>> cols;
  for (const auto& r : rows) {
    if (!cols.count(r.variant)) order.push_back(r.variant);
    auto& c = cols[r.variant];
    c[0].push_back(r.score.sim);
    c[1].push_back(r.score.mos);
    c[2].push_back(r.score.intell);
    c[3].push_back(r.fused);
  }
  std::vector<VariantSummary> out;
  for (const auto& v : order) {
    const auto& c = cols[v];
    out.push_back({v, mean_std(c[0]), mean_std(c[1]), mean_std(c[2]),
                   mean_std(c[3])});
  }
  return out;
}

std::vector<std::string> summary_header() {
  return {"variant",    "n",        "sim_mean",    "sim_std",
          "mos_mean",   "mos_std",  "intell_mean", "intell_std",
          "fused_mean", "fused_std"};
}

std::vector<std::string> summary_fields(const VariantSummary& s) {
  return {s.variant,
          std::to_string(s.fused.n),
          format_double(s.sim.mean),
          format_double(s.sim.std),
          format_double(s.mos.mean),
          format_double(s.mos.std),
          format_double(s.intell.mean),
          format_double(s.intell.std),
          format_double(s.fused.mean),
          format_double(s.fused.std)};
}

void write_summary(const std::filesystem::path& path,
                   const std::vector<VariantSummary>& summary) {
  CsvWriter w(path, summary_header());
  for (const auto& s : summary) w.write(summary_fields(s));
}

std::string format_summary_table(const std::vector<VariantSummary>& summary) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "variant" << std::setw(6) << "n"
     << std::setw(22) << "sim" << std::setw(22) << "mos" << std::setw(22)
     << "intell" << "fused\n";
  auto cell = [](const MeanStd& m) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(4) << m.mean << " +- " << m.std;
    return c.str();
  };
  for (const auto& s : summary) {
    os << std::left << std::setw(10) << s.variant << std::setw(6) << s.fused.n
       << std::setw(22) << cell(s.sim) << std::setw(22) << cell(s.mos)
       << std::setw(22) << cell(s.intell) << cell(s.fused) << "\n";
  }
  return os.str();
}

std::unique_ptr<env::Environment> make_environment(const ExperimentSpec& spec,
                                                   const Corpus& corpus) {
  return build_env(spec, corpus, model_for(spec, corpus));
}

env::SpeakerProfile scenario_profile(const ExperimentSpec& spec,
                                     const SpeakerRecord& record) {
  const std::size_t k =
      spec.scenario == Scenario::single_sentence ? 1 : spec.config.k;
  if (record.profile.k() < k) {
    throw ConfigError("speaker " + std::to_string(record.profile.id) +
                      " has fewer than " + std::to_string(k) + " references");
  }
  return record.profile.with_refs(k);
}

TrainResult train(const ExperimentSpec& spec_in, const Corpus& corpus,
                  const TrainOptions& options) {
  const ExperimentSpec spec = adopt_corpus(spec_in, corpus);
  spec.validate();
  check_scenario(spec, corpus);
  const RLConfig& cfg = spec.config;

  const auto model = model_for(spec, corpus);
  const auto train_idx =
      split_indices(corpus.speakers.size(), spec.eval_fraction, Split::train);
  std::vector<env::SpeakerProfile> profiles;
  for (auto i : train_idx) {
    profiles.push_back(scenario_profile(spec, corpus.speakers[i]));
  }

  const int steps = cfg.steps(spec.scenario);
  const std::size_t n_env = static_cast<std::size_t>(
      (cfg.rollout_batch + steps - 1) / steps);
  std::vector<std::unique_ptr<env::Environment>> envs;
  for (std::size_t i = 0; i < n_env; ++i) {
    envs.push_back(build_env(spec, corpus, model));
  }
  const StateLayout layout = envs.front()->layout();

  Rng init_rng = Rng::substream(cfg.seed, "policy-init");
  Rng rollout = Rng::substream(cfg.seed, "rollout");
  auto pspec = agent::PolicySpec::from_config(cfg, spec.scenario, layout);
  agent::Policy policy =
      agent::Policy::initialize(pspec, init_rng, cfg.init_log_std);

  {
    std::vector<StateVector> initial;
    for (std::size_t s = 0; s < train_idx.size(); ++s) {
      for (const auto& text : corpus.speakers[train_idx[s]].texts) {
        initial.push_back(envs.front()->reset(profiles[s], text));
      }
    }
    policy.fit_normalizer(agent::stack_states(initial));
  }

  agent::Adam optimizer(policy);
  const auto ppo = agent::PpoSettings::from_config(cfg);

  TrainResult result{agent::Checkpoint{cfg, policy, 0, rollout}, {}, {}, 0};
  std::uint64_t episode = 0;
  int below = 0;

  for (int update = 0; update < cfg.updates; ++update) {
    std::vector<std::size_t> who(n_env);
    std::vector<StateVector> states;
    for (std::size_t e = 0; e < n_env; ++e) {
      who[e] = rollout.uniform_index(profiles.size());
      const auto& texts = corpus.speakers[train_idx[who[e]]].texts;
      const auto& text = texts[rollout.uniform_index(texts.size())];
      states.push_back(envs[e]->reset(profiles[who[e]], text));
    }

    const auto flat = static_cast<Eigen::Index>(layout.flat_size());
    const auto adim = static_cast<Eigen::Index>(pspec.action_dim);
    // [env][step] so each episode is contiguous for GAE
    std::vector<agent::Mat> st(n_env, agent::Mat(steps, flat));
    std::vector<agent::Mat> raw(n_env, agent::Mat(steps, adim));
    std::vector<std::vector<double>> logp(n_env), val(n_env), rew(n_env);

    for (int t = 0; t < steps; ++t) {
      const agent::Mat batch_states = agent::stack_states(states);
      const auto samples = agent::select_actions(
          policy, batch_states, agent::ActionMode::sample, rollout);
      for (std::size_t e = 0; e < n_env; ++e) {
        st[e].row(t) = batch_states.row(static_cast<Eigen::Index>(e));
        for (Eigen::Index j = 0; j < adim; ++j) {
          raw[e](t, j) = samples[e].raw[static_cast<std::size_t>(j)];
        }
        logp[e].push_back(samples[e].log_prob);
        val[e].push_back(samples[e].value);
        auto tr = envs[e]->step(samples[e].action);
        rew[e].push_back(tr.reward);
        states[e] = std::move(tr.next_state);
      }
    }

    agent::RolloutBatch batch;
    const auto total = static_cast<Eigen::Index>(n_env) * steps;
    batch.states = agent::Mat(total, flat);
    batch.raw_actions = agent::Mat(total, adim);
    for (std::size_t e = 0; e < n_env; ++e) {
      const auto base = static_cast<Eigen::Index>(e) * steps;
      batch.states.middleRows(base, steps) = st[e];
      batch.raw_actions.middleRows(base, steps) = raw[e];
      for (int t = 0; t < steps; ++t) {
        batch.log_probs.push_back(logp[e][t]);
        batch.values.push_back(val[e][t]);
        batch.rewards.push_back(rew[e][t]);
        batch.dones.push_back(t == steps - 1);
      }

      const auto& env = *envs[e];
      const double start = env.initial_fused();
      const double final_fused = env.current_fused();
      result.episodes.push_back(make_row(spec, episode++,
                                         profiles[who[e]].id,
                                         env.current_score(), final_fused,
                                         "rl"));
      if (final_fused < start - 0.5 * std::abs(start)) {
        if (++below >= kDivergenceWindow) {
          throw DivergenceError(
              "training diverged: fused score more than 50% below the raw "
              "baseline for " + std::to_string(kDivergenceWindow) +
              " consecutive episodes (update " + std::to_string(update) +
              ", last fused " + format_double(final_fused) + " vs raw " +
              format_double(start) + ")");
        }
      } else {
        below = 0;
      }
    }
    const auto gae = agent::gae(batch.rewards, batch.values, batch.dones,
                                cfg.gamma, cfg.gae_lambda);
    batch.advantages = gae.advantages;
    batch.returns = gae.returns;

    auto settings = ppo;
    // a lone single-step sample has nothing to normalize against
    if (batch.size() == 1) settings.normalize_advantages = false;
    const auto rep = agent::ppo_update(policy, optimizer, std::move(batch),
                                       settings, rollout);
    if (rep.rejected) ++result.rejected_updates;
    result.losses.push_back(rep);
    if (options.on_update) options.on_update(update, rep);
  }

  result.checkpoint = agent::Checkpoint{cfg, policy,
                                        static_cast<std::uint64_t>(cfg.updates),
                                        rollout};
  if (options.write_files) {
    std::filesystem::create_directories(spec.out_dir);
    agent::save_checkpoint(result.checkpoint, spec.out_dir / "checkpoint.json");
    write_run_rows(spec.out_dir / "train.csv", result.episodes);
  }
  return result;
}

EvalResult evaluate(const agent::Checkpoint& checkpoint,
                    const ExperimentSpec& spec_in, const Corpus& corpus,
                    Split split) {
  const auto& pspec = checkpoint.policy.spec();
  if (pspec.layout.embedding_dim != corpus.params.d_e ||
      pspec.layout.text_dim != corpus.params.d_t) {
    throw DimensionError(
        "checkpoint expects d_e=" + std::to_string(pspec.layout.embedding_dim) +
        ", d_t=" + std::to_string(pspec.layout.text_dim) + " but corpus has d_e=" +
        std::to_string(corpus.params.d_e) + ", d_t=" +
        std::to_string(corpus.params.d_t));
  }
  ExperimentSpec spec = spec_in;
  spec.config = checkpoint.config;
  spec.scenario = pspec.scenario;
  spec.mask = pspec.layout.mask;
  spec.validate();
  check_scenario(spec, corpus);

  const auto model = model_for(spec, corpus);
  auto env = build_env(spec, corpus, model);
  if (env->layout() != pspec.layout) {
    throw DimensionError("checkpoint state layout does not match the environment");
  }
  const bool with_oracle =
      spec.env == EnvKind::voice && corpus.params.d_e <= kOracleMaxDim;

  EvalResult out;
  std::uint64_t episode = 0;
  Rng unused(0);
  for (auto idx : split_indices(corpus.speakers.size(), spec.eval_fraction, split)) {
    const auto& rec = corpus.speakers[idx];
    const auto profile = scenario_profile(spec, rec);
    const std::size_t n_texts = std::min(spec.eval_texts, rec.texts.size());
    for (std::size_t t = 0; t < n_texts; ++t) {
      const auto& text = rec.texts[t];
      StateVector state = env->reset(profile, text);
      const Embedding start = env->embedding();
      out.rows.push_back(make_row(spec, episode, profile.id,
                                  env->current_score(), env->initial_fused(),
                                  "raw"));
      while (!env->done()) {
        const auto a = agent::select_action(checkpoint.policy, state,
                                            agent::ActionMode::mode, unused);
        state = env->step(a.action).next_state;
      }
      out.rows.push_back(make_row(spec, episode, profile.id,
                                  env->current_score(), env->current_fused(),
                                  "rl"));
      if (with_oracle) {
        const auto grid = reachable_grid(spec, profile, start);
        const auto best = env::oracle_best(*env, profile, text, grid);
        const ScoreTriple s = env->score_state(profile, text, best.embedding);
        out.rows.push_back(make_row(spec, episode, profile.id, s, best.fused,
                                    "oracle"));
        const auto& voice = static_cast<const env::SyntheticVoiceEnv&>(*env);
        const double slack = env::grid_resolution_slack(
            voice.model(), env->settings().weights, grid,
            env::min_voiceprint_norm(voice.model(), text, grid));
        out.oracle_slack = std::max(out.oracle_slack, slack);
      }
      ++episode;
    }
  }
  out.summary = summarize(out.rows);
  return out;
}

FinetuneResult finetune_proxy(
    const std::function<double(const Embedding&)>& objective, Embedding start,
    int steps, double step_size, double h) {
  if (steps < 1) throw ConfigError("finetune: steps must be >= 1");
  if (!(step_size >= 0.0)) throw ConfigError("finetune: step_size must be >= 0");
  FinetuneResult best;
  best.embedding = start;
  best.fused = best.initial_fused = objective(start);
  Embedding e = std::move(start);
  Vector grad(e.size());
  for (int it = 1; it <= steps; ++it) {
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double saved = e[i];
      e[i] = saved + h;
      const double up = objective(e);
      e[i] = saved - h;
      const double down = objective(e);
      e[i] = saved;
      grad[i] = (up - down) / (2.0 * h);
      if (!std::isfinite(grad[i])) {
        throw NumericalError("finetune: non-finite gradient at coordinate " +
                             std::to_string(i) + " (step " +
                             std::to_string(it) + ")");
      }
    }
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += step_size * grad[i];
    const double f = objective(e);
    if (f > best.fused) {
      best.fused = f;
      best.embedding = e;
      best.best_step = it;
    }
  }
  return best;
}

FinetuneResult finetune_proxy(const env::Environment& env, const Corpus& corpus,
                              const env::SpeakerProfile& profile, int steps,
                              double step_size) {
  const TextFeatures calib = corpus.voice_model()->calibration_text();
  const Embedding start = profile.k() == 1 ? profile.refs.front()
                                           : mean_init(profile.refs);
  return finetune_proxy(
      [&](const Embedding& e) { return env.fused_score(profile, calib, e); },
      start, steps, step_size);
}

std::vector<RunRow> baseline_rows(const ExperimentSpec& spec_in,
                                  const Corpus& corpus,
                                  const std::string& method, Split split,
                                  int finetune_steps,
                                  double finetune_step_size) {
  const ExperimentSpec spec = adopt_corpus(spec_in, corpus);
  spec.validate();
  check_scenario(spec, corpus);
  if (method != "raw" && method != "finetune" && method != "oracle") {
    throw ConfigError("unknown baseline method '" + method +
                      "' (expected raw, finetune or oracle)");
  }
  if (method == "oracle" &&
      (spec.env != EnvKind::voice || corpus.params.d_e > kOracleMaxDim)) {
    throw ConfigError("the grid oracle needs the voice env and d_e <= 3");
  }
  const auto model = model_for(spec, corpus);
  auto env = build_env(spec, corpus, model);
  std::vector<RunRow> rows;
  std::uint64_t episode = 0;
  for (auto idx : split_indices(corpus.speakers.size(), spec.eval_fraction, split)) {
    const auto& rec = corpus.speakers[idx];
    const auto profile = scenario_profile(spec, rec);
    std::optional<Embedding> tuned;
    if (method == "finetune") {
      tuned = finetune_proxy(*env, corpus, profile, finetune_steps,
                             finetune_step_size).embedding;
    }
    const std::size_t n_texts = std::min(spec.eval_texts, rec.texts.size());
    for (std::size_t t = 0; t < n_texts; ++t) {
      const auto& text = rec.texts[t];
      env->reset(profile, text);
      Embedding e = env->embedding();
      if (tuned) e = *tuned;
      if (method == "oracle") {
        e = env::oracle_best(*env, profile, text,
                             reachable_grid(spec, profile, e)).embedding;
      }
      const ScoreTriple s = env->score_state(profile, text, e);
      rows.push_back(make_row(spec, episode++, profile.id, s,
                              scoring::fuse_scores(s, env->settings().weights),
                              method));
    }
  }
  return rows;
}

std::vector<RunRow> compare_rl_finetune(const ExperimentSpec& spec_in,
                                        const Corpus& corpus,
                                        const std::vector<std::size_t>& ks,
                                        int finetune_steps,
                                        double finetune_step_size) {
  std::vector<RunRow> rows;
  for (std::size_t k : ks) {
    ExperimentSpec spec = spec_in;
    spec.scenario = Scenario::few_sentence;
    spec.config.k = k;
    spec.run_id = spec_in.run_id + "-k" + std::to_string(k);
    spec.out_dir = spec_in.out_dir / ("k" + std::to_string(k));
    TrainOptions opts;
    opts.write_files = false;
    const auto trained = train(spec, corpus, opts);
    const auto ev = evaluate(trained.checkpoint, spec, corpus, Split::eval);
    for (const auto& r : ev.rows) {
      if (r.variant != "oracle") rows.push_back(r);
    }
    auto ft = baseline_rows(spec, corpus, "finetune", Split::eval,
                            finetune_steps, finetune_step_size);
    rows.insert(rows.end(), ft.begin(), ft.end());
  }
  return rows;
}

}  // namespace asrrl::harness
