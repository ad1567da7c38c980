// asrrl: corpus generation, training, evaluation, baselines, sweeps and
// ablations for the speaker-embedding refinement loop.
//
// Exit codes: 0 success, 2 config error, 3 divergence abort, 4 I/O error.

#include <unistd.h>

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "asrrl/agent/checkpoint.hpp"
#include "asrrl/core/error.hpp"
#include "asrrl/core/numeric_text.hpp"
#include "asrrl/harness/corpus.hpp"
#include "asrrl/harness/csv.hpp"
#include "asrrl/harness/experiment.hpp"
#include "asrrl/harness/study.hpp"
#include "asrrl/scoring/external.hpp"

namespace fs = std::filesystem;
using namespace asrrl;
using namespace asrrl::harness;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

// Options shared by every command that builds an ExperimentSpec: a config
// file, then --set overrides, then dedicated flags.
struct SpecArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string scenario;
  std::string out = ".";
  std::string run_id;

  void add_to(CLI::App* cmd, bool with_scenario = true) {
    cmd->add_option("--config", config, "key = value config file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "override, key=value (repeatable)");
    if (with_scenario) {
      cmd->add_option("--scenario", scenario, "ss or fs");
    }
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--run-id", run_id, "run id (unique per output directory)");
  }

  ExperimentSpec build() const {
    ExperimentSpec spec;
    if (!config.empty()) apply_config_file(spec, config);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("--set expects key=value, got '" + kv + "'");
      }
      spec.set(std::string(trim(kv.substr(0, eq))), kv.substr(eq + 1));
    }
    if (!scenario.empty()) spec.set("scenario", scenario);
    if (!run_id.empty()) spec.run_id = run_id;
    spec.out_dir = out;
    spec.validate();
    return spec;
  }
};

void write_eval(const fs::path& dir, const std::string& stem,
                const std::vector<RunRow>& rows) {
  fs::create_directories(dir);
  write_run_rows(dir / (stem + ".csv"), rows);
  write_summary(dir / (stem + "_summary.csv"), summarize(rows));
}

int run(int argc, char** argv) {
  CLI::App app{"Reinforcement-learning refinement of speaker embeddings"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  CorpusOptions copt;
  std::string corpus_out;
  bool force = false;
  std::vector<std::string> voice_sets;
  gen->add_option("--seed", copt.seed, "root seed")->required();
  gen->add_option("--speakers", copt.speakers, "speaker count")
      ->check(CLI::PositiveNumber);
  gen->add_option("--refs", copt.refs, "references per speaker")
      ->check(CLI::PositiveNumber);
  gen->add_option("--dim-e", copt.params.d_e, "embedding dimension")
      ->check(CLI::PositiveNumber);
  gen->add_option("--dim-t", copt.params.d_t, "text feature dimension")
      ->check(CLI::PositiveNumber);
  gen->add_option("--texts", copt.texts_per_speaker, "texts per speaker")
      ->check(CLI::PositiveNumber);
  gen->add_option("--voice", voice_sets,
                  "voice-space override, key=value (d_s, d_v, speaker_rank, "
                  "speaker_sigma, ref_sigma, text_gain, embedding_gain, "
                  "bias_sigma, beta, kappa, radius)");
  gen->add_option("--out", corpus_out, "corpus file")->required();
  gen->add_flag("--force", force, "overwrite an existing file");

  // train
  auto* tr = app.add_subcommand("train", "train a policy on a corpus");
  SpecArgs tr_args;
  std::string tr_corpus;
  tr_args.add_to(tr);
  tr->add_option("--corpus", tr_corpus, "corpus file")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  SpecArgs ev_args;
  std::string ev_ckpt, ev_corpus, ev_split = "eval";
  bool ev_save = false;
  ev_args.add_to(ev, false);
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--corpus", ev_corpus, "corpus file")->required();
  ev->add_option("--split", ev_split, "train, eval or all");
  ev->add_flag("--save", ev_save, "write eval.csv and eval_summary.csv to --out");

  // baseline
  auto* bl = app.add_subcommand("baseline", "raw, fine-tune proxy or oracle");
  SpecArgs bl_args;
  std::string bl_corpus, bl_method = "raw", bl_split = "eval";
  std::vector<std::size_t> compare_k;
  int ft_steps = 2000;
  double ft_step_size = 0.01;
  bl_args.add_to(bl);
  bl->add_option("--corpus", bl_corpus, "corpus file")->required();
  bl->add_option("--method", bl_method, "raw, finetune or oracle");
  bl->add_option("--split", bl_split, "train, eval or all");
  bl->add_option("--steps", ft_steps, "fine-tune steps")->check(CLI::PositiveNumber);
  bl->add_option("--step-size", ft_step_size, "fine-tune step size");
  bl->add_option("--compare-k", compare_k,
                 "train FS per reference count and compare with the fine-tune "
                 "proxy, e.g. 2,3,5")
      ->delimiter(',');

  // sweep
  auto* sw = app.add_subcommand("sweep", "hyperparameter sweep");
  SpecArgs sw_args;
  std::string sw_corpus, sw_axis;
  std::vector<double> sw_values;
  unsigned sw_threads = 0;
  sw_args.add_to(sw);
  sw->add_option("--corpus", sw_corpus, "corpus file")->required();
  sw->add_option("--axis", sw_axis,
                 "gamma, action_scale, steps, lambda1 or lambda2")
      ->required();
  sw->add_option("--values", sw_values, "comma-separated values")
      ->delimiter(',')
      ->required();
  sw->add_option("--threads", sw_threads, "parallel runs (0 = all cores)");

  // ablate
  auto* ab = app.add_subcommand("ablate", "reward-term or state-segment ablation");
  SpecArgs ab_args;
  std::string ab_corpus, ab_mode;
  unsigned ab_threads = 0;
  ab_args.add_to(ab);
  ab->add_option("--corpus", ab_corpus, "corpus file")->required();
  ab->add_option("--mode", ab_mode, "score_terms or state_segments")->required();
  ab->add_option("--threads", ab_threads, "parallel runs (0 = all cores)");

  // echo-scorer
  auto* es = app.add_subcommand(
      "echo-scorer", "external scorer on stdio that echoes speech[0]");
  scoring::ServeOptions serve;
  es->add_option("--window", serve.window, "responses shuffled per window")
      ->check(CLI::PositiveNumber);
  es->add_option("--seed", serve.seed, "shuffle seed");
  es->add_option("--malformed-at", serve.malformed_at,
                 "replace the n-th response with garbage (0 = never)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  if (*gen) {
    for (const auto& kv : voice_sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("--voice expects key=value, got '" + kv + "'");
      }
      const std::string k = kv.substr(0, eq);
      const std::string v = kv.substr(eq + 1);
      auto& p = copt.params;
      if (k == "d_s") p.d_s = parse_u64(v, k);
      else if (k == "d_v") p.d_v = parse_u64(v, k);
      else if (k == "speaker_rank") p.speaker_rank = parse_u64(v, k);
      else if (k == "speaker_sigma") p.speaker_sigma = parse_double(v, k);
      else if (k == "ref_sigma") p.ref_sigma = parse_double(v, k);
      else if (k == "text_gain") p.text_gain = parse_double(v, k);
      else if (k == "embedding_gain") p.embedding_gain = parse_double(v, k);
      else if (k == "bias_sigma") p.bias_sigma = parse_double(v, k);
      else if (k == "beta") p.beta = parse_double(v, k);
      else if (k == "kappa") p.kappa = parse_double(v, k);
      else if (k == "radius") p.radius = parse_double(v, k);
      else throw ConfigError("unknown voice-space key '" + k + "'");
    }
    // the speaker rank follows d_e unless given explicitly
    bool rank_set = false;
    for (const auto& kv : voice_sets) rank_set |= kv.starts_with("speaker_rank=");
    if (!rank_set) {
      copt.params.speaker_rank =
          env::VoiceSpaceParams::defaults_for(copt.params.d_e, copt.params.d_t)
              .speaker_rank;
    }
    const Corpus corpus = gen_corpus(copt);
    write_corpus(corpus, corpus_out, force);
    spdlog::info("wrote {} speakers x {} refs to {}", corpus.speakers.size(),
                 corpus.k_refs(), corpus_out);
    return 0;
  }

  if (*tr) {
    const ExperimentSpec spec = tr_args.build();
    const Corpus corpus = read_corpus(tr_corpus);
    TrainOptions opts;
    opts.on_update = [&](int u, const agent::LossReport& r) {
      if ((u + 1) % 50 == 0 || u + 1 == spec.config.updates) {
        spdlog::info("update {}/{}: policy {:.4f} value {:.3g} kl {:.2g}{}",
                     u + 1, spec.config.updates, r.policy_loss, r.value_loss,
                     r.approx_kl, r.rejected ? " (rejected)" : "");
      }
    };
    const auto result = train(spec, corpus, opts);
    std::cout << format_summary_table(summarize(result.episodes));
    spdlog::info("checkpoint and train.csv written to {}", spec.out_dir.string());
    return 0;
  }

  if (*ev) {
    ExperimentSpec spec = ev_args.build();
    const Corpus corpus = read_corpus(ev_corpus);
    const auto ckpt = agent::load_checkpoint(ev_ckpt);
    const auto result = evaluate(ckpt, spec, corpus, parse_split(ev_split));
    std::cout << format_summary_table(result.summary);
    if (result.oracle_slack > 0) {
      std::cout << "oracle grid slack " << format_double(result.oracle_slack)
                << "\n";
    }
    if (ev_save) write_eval(spec.out_dir, "eval", result.rows);
    return 0;
  }

  if (*bl) {
    const ExperimentSpec spec = bl_args.build();
    const Corpus corpus = read_corpus(bl_corpus);
    if (!compare_k.empty()) {
      const auto rows =
          compare_rl_finetune(spec, corpus, compare_k, ft_steps, ft_step_size);
      write_eval(spec.out_dir, "rl_vs_finetune", rows);
      std::cout << format_summary_table(summarize(rows));
      return 0;
    }
    const auto rows = baseline_rows(spec, corpus, bl_method,
                                    parse_split(bl_split), ft_steps,
                                    ft_step_size);
    write_eval(spec.out_dir, "baseline_" + bl_method, rows);
    std::cout << format_summary_table(summarize(rows));
    return 0;
  }

  if (*sw) {
    const ExperimentSpec spec = sw_args.build();
    const Corpus corpus = read_corpus(sw_corpus);
    SweepOptions opts;
    opts.threads = sw_threads;
    const auto axis = parse_sweep_axis(sw_axis);
    const auto result = sweep(spec, corpus, axis, sw_values, opts);
    for (const auto& p : result.points) {
      std::cout << to_string(axis) << " = " << format_double(p.value) << "\n"
                << format_summary_table(p.summary);
    }
    return 0;
  }

  if (*ab) {
    ExperimentSpec spec = ab_args.build();
    const Corpus corpus = read_corpus(ab_corpus);
    AblationOptions opts;
    opts.threads = ab_threads;
    const auto rows = ablate(spec, corpus, parse_ablation_mode(ab_mode), opts);
    std::cout << csv_record(ablation_header());
    for (const auto& r : rows) std::cout << csv_record(ablation_fields(r));
    return 0;
  }

  if (*es) {
    scoring::FdLineStream stdio(STDIN_FILENO, STDOUT_FILENO, false);
    scoring::serve_scorer(stdio, scoring::echo_handler, serve);
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // log to stderr so stdout stays parseable
  spdlog::set_default_logger(spdlog::stderr_color_mt("asrrl"));
  try {
    return run(argc, argv);
  } catch (const DivergenceError& e) {
    spdlog::error("{}", e.what());
    return kExitDivergence;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const DimensionError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
