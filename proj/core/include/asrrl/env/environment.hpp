#ifndef ASRRL_ENV_ENVIRONMENT_HPP_
#define ASRRL_ENV_ENVIRONMENT_HPP_

#include <memory>
#include <optional>

#include "asrrl/core/action.hpp"
#include "asrrl/core/config.hpp"
#include "asrrl/core/state.hpp"
#include "asrrl/core/trace.hpp"
#include "asrrl/env/voice_model.hpp"
#include "asrrl/scoring/fusion.hpp"
#include "asrrl/scoring/scorer.hpp"

namespace asrrl::env {

struct Transition {
  StateVector next_state;
  double reward = 0.0;
  ScoreTriple score;
  double fused = 0.0;
  bool done = false;
};

struct EpisodeSettings {
  Scenario scenario = Scenario::single_sentence;
  int step_budget = 3;
  double action_scale = 0.001;
  scoring::RewardWeights weights;
  SegmentMask mask;

  static EpisodeSettings from_config(const RLConfig& config, Scenario scenario,
                                     const SegmentMask& mask = {});
};

// Episode protocol shared by every environment: reset places the state at
// the encoder embedding (SS) or the reference mean (FS); step applies the
// action, re-scores, and pays the change in fused score.
//
// An instance holds mutable episode state and is not thread-safe; run one
// instance per rollout worker.
class Environment {
 public:
  explicit Environment(EpisodeSettings settings);
  virtual ~Environment() = default;

  const EpisodeSettings& settings() const { return settings_; }
  virtual StateLayout layout() const = 0;

  StateVector reset(const SpeakerProfile& profile, const TextFeatures& text);
  Transition step(const Action& action);

  // Scores an arbitrary embedding for the given speaker and text without
  // touching the episode.
  virtual ScoreTriple score_state(const SpeakerProfile& profile,
                                  const TextFeatures& text,
                                  const Embedding& embedding) const = 0;
  double fused_score(const SpeakerProfile& profile, const TextFeatures& text,
                     const Embedding& embedding) const;

  bool done() const { return step_index_ >= settings_.step_budget; }
  int step_index() const { return step_index_; }
  const Embedding& embedding() const { return embedding_; }
  double initial_fused() const { return initial_fused_; }
  double current_fused() const { return current_fused_; }
  const ScoreTriple& current_score() const { return current_score_; }
  const SpeakerProfile& profile() const;
  const TextFeatures& text() const;

 protected:
  virtual OptionalSegments optional_segments(const SpeakerProfile& profile,
                                             const TextFeatures& text,
                                             const Embedding& embedding) const;

 private:
  StateVector make_state() const;

  EpisodeSettings settings_;
  std::optional<SpeakerProfile> profile_;
  std::optional<TextFeatures> text_;
  Embedding embedding_;
  ScoreTriple current_score_;
  double initial_fused_ = 0.0;
  double current_fused_ = 0.0;
  int step_index_ = 0;
};

// Recoverable-optimum voice space: similarity peaks at e* on the calibration
// text, quality and intelligibility are penalized outside a norm shell.
class SyntheticVoiceEnv : public Environment {
 public:
  SyntheticVoiceEnv(std::shared_ptr<const VoiceModel> model,
                    EpisodeSettings settings);

  const VoiceModel& model() const { return *model_; }
  StateLayout layout() const override;

  // Route component scoring through plug-in scorers (synthetic or external)
  // instead of the built-in formulas.
  void set_scorers(scoring::ScorerSet scorers) { scorers_ = std::move(scorers); }

  ScoreTriple score_state(const SpeakerProfile& profile,
                          const TextFeatures& text,
                          const Embedding& embedding) const override;
  SpeechFeatures synth(const TextFeatures& text,
                       const Embedding& embedding) const {
    return model_->synth(text, embedding);
  }

 protected:
  OptionalSegments optional_segments(const SpeakerProfile& profile,
                                     const TextFeatures& text,
                                     const Embedding& embedding) const override;

 private:
  std::shared_ptr<const VoiceModel> model_;
  std::optional<scoring::ScorerSet> scorers_;
};

// Similarity rises along a unit direction w while quality and
// intelligibility degrade once w.e passes tau.
class TradeoffEnv : public Environment {
 public:
  TradeoffEnv(Embedding direction, double tau, std::size_t d_t,
              EpisodeSettings settings);

  const Embedding& direction() const { return direction_; }
  double tau() const { return tau_; }
  StateLayout layout() const override;

  ScoreTriple score_state(const SpeakerProfile& profile,
                          const TextFeatures& text,
                          const Embedding& embedding) const override;
  ScoreTriple score_projection(double projection) const;

 private:
  Embedding direction_;
  double tau_;
  std::size_t d_t_;
};

// Requires ||w||_2 = 1 (within 1e-9) and tau > 0.
std::unique_ptr<TradeoffEnv> make_tradeoff_env(Embedding direction, double tau,
                                               std::size_t d_t,
                                               EpisodeSettings settings);
// Draws a random unit direction from the seed.
std::unique_ptr<TradeoffEnv> make_tradeoff_env(std::uint64_t seed,
                                               std::size_t d_e, double tau,
                                               std::size_t d_t,
                                               EpisodeSettings settings);

// Runs one episode with a fixed action sequence and records the trace.
EpisodeTrace run_episode(Environment& env, const SpeakerProfile& profile,
                         const TextFeatures& text,
                         std::span<const Action> actions);

}  // namespace asrrl::env

#endif  // ASRRL_ENV_ENVIRONMENT_HPP_
