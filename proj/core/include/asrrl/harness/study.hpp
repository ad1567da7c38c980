#ifndef ASRRL_HARNESS_STUDY_HPP_
#define ASRRL_HARNESS_STUDY_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "asrrl/harness/experiment.hpp"

namespace asrrl::harness {

// ---- hyperparameter sweeps ----

enum class SweepAxis { gamma, action_scale, steps, lambda1, lambda2 };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);

// Sets the swept parameter; `steps` targets the scenario's step budget.
void apply_axis(ExperimentSpec& spec, SweepAxis axis, double value);

struct SweepPoint {
  double value = 0.0;
  std::vector<RunRow> rows;
  std::vector<VariantSummary> summary;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::gamma;
  std::vector<SweepPoint> points;  // in the order of `values`
};

struct SweepOptions {
  // 0 = one per hardware thread
  unsigned threads = 0;
  // write sweep_<axis>.csv and sweep_<axis>_summary.csv into spec.out_dir
  bool write_files = true;
};

// One train + evaluate per value. Every point shares the corpus, the seed
// (so initial weights and rollout streams) and the eval texts; only the
// swept parameter differs. Duplicate values are refused.
SweepResult sweep(const ExperimentSpec& spec, const Corpus& corpus,
                  SweepAxis axis, const std::vector<double>& values,
                  const SweepOptions& options = {});

std::vector<std::string> sweep_header();
std::vector<std::string> sweep_summary_header();

// ---- ablations ----

enum class AblationMode { score_terms, state_segments };

std::string_view to_string(AblationMode mode);
AblationMode parse_ablation_mode(std::string_view text);

struct AblationVariant {
  std::string label;
  ExperimentSpec spec;
};

// score_terms: the four reward-term rows (full, intell only, mos only,
// sim only) on the tradeoff environment.
// state_segments: every prior subset of {f_rv, f_t} crossed with every
// posterior subset of {e_s, f_sv}; e is always present.
std::vector<AblationVariant> ablation_variants(const ExperimentSpec& spec,
                                               AblationMode mode);

// Mean of one variant's rl episodes on one held-out speaker. `fused` uses
// the configured lambda weights with both terms on, so variants trained on
// different rewards are compared on the same scale.
struct AblationRow {
  std::string mode;
  std::string label;
  std::uint64_t seed = 0;
  std::uint64_t speaker = 0;
  std::size_t episodes = 0;
  ScoreTriple score;
  double fused = 0.0;
};

std::vector<std::string> ablation_header();
std::vector<std::string> ablation_fields(const AblationRow& row);
AblationRow parse_ablation_row(const std::vector<std::string>& fields);

struct AblationOptions {
  unsigned threads = 0;
  // write ablation_<mode>.csv into spec.out_dir
  bool write_files = true;
};

std::vector<AblationRow> ablate(const ExperimentSpec& spec,
                                const Corpus& corpus, AblationMode mode,
                                const AblationOptions& options = {});

// Runs `jobs` tasks on up to `threads` workers (0 = hardware threads). The
// first exception thrown by a task is rethrown once all workers stop.
void run_parallel(std::size_t jobs, unsigned threads,
                  const std::function<void(std::size_t)>& task);

}  // namespace asrrl::harness

#endif  // ASRRL_HARNESS_STUDY_HPP_
