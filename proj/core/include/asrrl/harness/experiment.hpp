#ifndef ASRRL_HARNESS_EXPERIMENT_HPP_
#define ASRRL_HARNESS_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "asrrl/agent/checkpoint.hpp"
#include "asrrl/agent/ppo.hpp"
#include "asrrl/core/config.hpp"
#include "asrrl/env/environment.hpp"
#include "asrrl/harness/corpus.hpp"
#include "asrrl/harness/stats.hpp"

namespace asrrl::harness {

enum class EnvKind { voice, tradeoff };

std::string_view to_string(EnvKind kind);
EnvKind parse_env_kind(std::string_view text);

struct ExperimentSpec {
  Scenario scenario = Scenario::single_sentence;
  EnvKind env = EnvKind::voice;
  RLConfig config;
  SegmentMask mask;
  double eval_fraction = 0.2;
  // texts per held-out speaker used by evaluate (10 speakers x 10 texts
  // gives the 100-episode cells)
  std::size_t eval_texts = 10;
  // tradeoff environment threshold on w.e
  double tradeoff_tau = 0.1;
  std::string run_id = "run";
  std::filesystem::path out_dir = ".";

  void validate() const;
  // Every RLConfig field plus: scenario, env, eval_fraction, eval_texts,
  // tradeoff_tau, run_id, mask.text, mask.f_rv, mask.e_s, mask.f_sv, mask.e
  // (which may only be true).
  void set(const std::string& key, const std::string& value);
};

// Flat "key = value" lines, '#' starts a comment. Unknown keys are errors.
std::vector<std::pair<std::string, std::string>> parse_config_text(
    std::string_view text);
void apply_config_file(ExperimentSpec& spec, const std::filesystem::path& path);

// One row of a RunRecord CSV.
struct RunRow {
  std::string run_id;
  Scenario scenario = Scenario::single_sentence;
  std::size_t k = 1;
  double gamma = 0.0;
  double action_scale = 0.0;
  int steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t episode = 0;
  std::uint64_t speaker = 0;
  ScoreTriple score;
  double fused = 0.0;
  std::string variant;
};

std::vector<std::string> run_row_header();
std::vector<std::string> run_row_fields(const RunRow& row);
RunRow parse_run_row(const std::vector<std::string>& fields);
void write_run_rows(const std::filesystem::path& path,
                    const std::vector<RunRow>& rows);
std::vector<RunRow> read_run_rows(const std::filesystem::path& path);

struct VariantSummary {
  std::string variant;
  MeanStd sim, mos, intell, fused;
};

// Per-variant mean +- std, variants in order of first appearance.
std::vector<VariantSummary> summarize(const std::vector<RunRow>& rows);
std::vector<std::string> summary_header();
std::vector<std::string> summary_fields(const VariantSummary& s);
void write_summary(const std::filesystem::path& path,
                   const std::vector<VariantSummary>& summary);
std::string format_summary_table(const std::vector<VariantSummary>& summary);

std::unique_ptr<env::Environment> make_environment(const ExperimentSpec& spec,
                                                   const Corpus& corpus);
// Profile as seen by the scenario: one reference for SS, the first k for FS.
env::SpeakerProfile scenario_profile(const ExperimentSpec& spec,
                                     const SpeakerRecord& record);

struct TrainOptions {
  // write checkpoint.json and train.csv into spec.out_dir
  bool write_files = true;
  // called after every PPO update with (update index, report)
  std::function<void(int, const agent::LossReport&)> on_update;
};

struct TrainResult {
  agent::Checkpoint checkpoint;
  std::vector<RunRow> episodes;
  std::vector<agent::LossReport> losses;
  std::size_t rejected_updates = 0;
};

// Throws DivergenceError when the episode's final fused score falls more
// than 50% below its starting (raw) score for 100 consecutive episodes.
TrainResult train(const ExperimentSpec& spec, const Corpus& corpus,
                  const TrainOptions& options = {});

struct EvalResult {
  std::vector<RunRow> rows;
  std::vector<VariantSummary> summary;
  // per-episode grid slack used for the oracle, when it ran
  double oracle_slack = 0.0;
};

// Mode-action episodes on the split's speakers, eval_texts texts each, for
// variants rl and raw, plus oracle when the env is voice and d_e <= 3.
EvalResult evaluate(const agent::Checkpoint& checkpoint,
                    const ExperimentSpec& spec, const Corpus& corpus,
                    Split split = Split::eval);

struct FinetuneResult {
  Embedding embedding;
  double fused = 0.0;
  double initial_fused = 0.0;
  int best_step = 0;
};

// Gradient ascent on objective(e) with central differences of width h;
// returns the best point visited (the start counts as step 0).
FinetuneResult finetune_proxy(
    const std::function<double(const Embedding&)>& objective, Embedding start,
    int steps = 2000, double step_size = 0.01, double h = 1e-4);

// Fine-tunes the speaker's starting embedding (refs[0] for SS, mean of the
// references for FS) against the fused score on the calibration text.
FinetuneResult finetune_proxy(const env::Environment& env,
                              const Corpus& corpus,
                              const env::SpeakerProfile& profile,
                              int steps = 2000, double step_size = 0.01);

// Baseline rows for the split, variant raw | finetune | oracle.
std::vector<RunRow> baseline_rows(const ExperimentSpec& spec,
                                  const Corpus& corpus,
                                  const std::string& method, Split split,
                                  int finetune_steps = 2000,
                                  double finetune_step_size = 0.01);

// FS RL vs fine-tune proxy for each reference count: trains one policy per k
// and emits rl, raw and finetune rows on the held-out speakers.
std::vector<RunRow> compare_rl_finetune(const ExperimentSpec& spec,
                                        const Corpus& corpus,
                                        const std::vector<std::size_t>& ks,
                                        int finetune_steps = 2000,
                                        double finetune_step_size = 0.01);

}  // namespace asrrl::harness

#endif  // ASRRL_HARNESS_EXPERIMENT_HPP_
