#include "asrrl/env/environment.hpp"

#include <cmath>
#include <string>

#include "asrrl/core/error.hpp"
#include "asrrl/core/rng.hpp"

namespace asrrl::env {

EpisodeSettings EpisodeSettings::from_config(const RLConfig& config,
                                             Scenario scenario,
                                             const SegmentMask& mask) {
  EpisodeSettings s;
  s.scenario = scenario;
  s.step_budget = config.steps(scenario);
  s.action_scale = config.action_scale;
  s.weights = scoring::RewardWeights::from_config(config);
  s.mask = mask;
  return s;
}

Environment::Environment(EpisodeSettings settings)
    : settings_(std::move(settings)) {
  if (settings_.step_budget < 1) {
    throw ConfigError("environment: step budget must be >= 1");
  }
  if (!(settings_.action_scale > 0.0)) {
    throw ConfigError("environment: action_scale must be > 0");
  }
}

const SpeakerProfile& Environment::profile() const {
  if (!profile_) throw EpisodeError("environment has not been reset");
  return *profile_;
}

const TextFeatures& Environment::text() const {
  if (!text_) throw EpisodeError("environment has not been reset");
  return *text_;
}

double Environment::fused_score(const SpeakerProfile& profile,
                                const TextFeatures& text,
                                const Embedding& embedding) const {
  return scoring::fuse_scores(score_state(profile, text, embedding),
                              settings_.weights);
}

OptionalSegments Environment::optional_segments(const SpeakerProfile&,
                                                const TextFeatures&,
                                                const Embedding&) const {
  return {};
}

StateVector Environment::make_state() const {
  const StateLayout lay = layout();
  OptionalSegments optional;
  const SegmentMask& mask = lay.mask;
  if (mask.prior_voiceprint || mask.any_posterior()) {
    optional = optional_segments(*profile_, *text_, embedding_);
  }
  return flatten_state(lay, *text_, embedding_, optional);
}

StateVector Environment::reset(const SpeakerProfile& profile,
                               const TextFeatures& text) {
  const std::size_t k = profile.k();
  if (settings_.scenario == Scenario::single_sentence && k != 1) {
    throw EpisodeError("SS scenario needs exactly one reference, speaker " +
                       std::to_string(profile.id) + " has " + std::to_string(k));
  }
  if (settings_.scenario == Scenario::few_sentence && k < 2) {
    throw EpisodeError("FS scenario needs at least two references, speaker " +
                       std::to_string(profile.id) + " has " + std::to_string(k));
  }
  profile_ = profile;
  text_ = text;
  embedding_ = settings_.scenario == Scenario::single_sentence
                   ? profile.refs.front()
                   : mean_init(profile.refs);
  step_index_ = 0;
  current_score_ = score_state(profile, text, embedding_);
  initial_fused_ = scoring::fuse_scores(current_score_, settings_.weights);
  current_fused_ = initial_fused_;
  return make_state();
}

Transition Environment::step(const Action& action) {
  if (!profile_) throw EpisodeError("step before reset");
  if (done()) {
    throw EpisodeError("episode is finished after " +
                       std::to_string(step_index_) + " steps");
  }
  if (scenario_of(action) != settings_.scenario) {
    throw EpisodeError(std::string("action variant ") +
                       std::string(to_string(scenario_of(action))) +
                       " does not match scenario " +
                       std::string(to_string(settings_.scenario)));
  }
  if (const auto* ss = std::get_if<RefinementAction>(&action)) {
    embedding_ = apply_ss(embedding_, *ss, settings_.action_scale);
  } else {
    embedding_ = fuse_fs(profile_->refs, std::get<FusionAction>(action)).fused;
  }
  ++step_index_;
  const double previous = current_fused_;
  current_score_ = score_state(*profile_, *text_, embedding_);
  current_fused_ = scoring::fuse_scores(current_score_, settings_.weights);

  Transition t{make_state(), scoring::step_reward(current_fused_, previous),
               current_score_, current_fused_, done()};
  return t;
}

SyntheticVoiceEnv::SyntheticVoiceEnv(std::shared_ptr<const VoiceModel> model,
                                     EpisodeSettings settings)
    : Environment(std::move(settings)), model_(std::move(model)) {
  if (!model_) throw ConfigError("SyntheticVoiceEnv: null model");
  layout().validate();
}

StateLayout SyntheticVoiceEnv::layout() const {
  StateLayout lay;
  lay.text_dim = model_->params().d_t;
  lay.embedding_dim = model_->params().d_e;
  lay.voiceprint_dim = model_->params().d_v;
  lay.mask = settings().mask;
  return lay;
}

ScoreTriple SyntheticVoiceEnv::score_state(const SpeakerProfile& profile,
                                           const TextFeatures& text,
                                           const Embedding& embedding) const {
  if (!scorers_) return model_->score(text, embedding, profile.target_voiceprint);
  scoring::ScoreContext context;
  context.target = profile.target_voiceprint;
  context.embedding = embedding;
  return scorers_->score(model_->synth(text, embedding), context);
}

OptionalSegments SyntheticVoiceEnv::optional_segments(
    const SpeakerProfile& profile, const TextFeatures& text,
    const Embedding& embedding) const {
  OptionalSegments out;
  const SegmentMask& mask = settings().mask;
  if (mask.prior_voiceprint) out.prior_voiceprint = profile.target_voiceprint;
  if (mask.any_posterior()) {
    const SpeechFeatures speech = model_->synth(text, embedding);
    if (mask.posterior_embedding) out.posterior_embedding = model_->encode(speech);
    if (mask.posterior_voiceprint) {
      out.posterior_voiceprint = model_->voiceprint(speech);
    }
  }
  return out;
}

TradeoffEnv::TradeoffEnv(Embedding direction, double tau, std::size_t d_t,
                         EpisodeSettings settings)
    : Environment(std::move(settings)),
      direction_(std::move(direction)),
      tau_(tau),
      d_t_(d_t) {
  if (direction_.empty()) throw ConfigError("tradeoff env: empty direction");
  if (std::abs(l2_norm(direction_.span()) - 1.0) > 1e-9) {
    throw ConfigError("tradeoff env: direction must have unit norm, got " +
                      std::to_string(l2_norm(direction_.span())));
  }
  if (!(tau > 0.0)) throw ConfigError("tradeoff env: tau must be > 0");
  const SegmentMask& mask = this->settings().mask;
  if (mask.prior_voiceprint || mask.any_posterior()) {
    throw ConfigError("tradeoff env has no voiceprint segments");
  }
  layout().validate();
}

StateLayout TradeoffEnv::layout() const {
  StateLayout lay;
  lay.text_dim = d_t_;
  lay.embedding_dim = direction_.size();
  lay.mask = settings().mask;
  return lay;
}

ScoreTriple TradeoffEnv::score_projection(double projection) const {
  const double excess = std::max(0.0, projection - tau_);
  const double penalty = std::exp(-excess);
  return {1.0 / (1.0 + std::exp(-projection)), kMaxMos * penalty,
          1.0 - penalty};
}

ScoreTriple TradeoffEnv::score_state(const SpeakerProfile&,
                                     const TextFeatures& text,
                                     const Embedding& embedding) const {
  if (embedding.size() != direction_.size()) {
    throw DimensionError("tradeoff env: embedding has length " +
                         std::to_string(embedding.size()) + ", expected " +
                         std::to_string(direction_.size()));
  }
  if (text.size() != d_t_) {
    throw DimensionError("tradeoff env: text has length " +
                         std::to_string(text.size()) + ", expected " +
                         std::to_string(d_t_));
  }
  double projection = 0.0;
  for (std::size_t i = 0; i < embedding.size(); ++i) {
    projection += direction_[i] * embedding[i];
  }
  return score_projection(projection);
}

std::unique_ptr<TradeoffEnv> make_tradeoff_env(Embedding direction, double tau,
                                               std::size_t d_t,
                                               EpisodeSettings settings) {
  return std::make_unique<TradeoffEnv>(std::move(direction), tau, d_t,
                                       std::move(settings));
}

std::unique_ptr<TradeoffEnv> make_tradeoff_env(std::uint64_t seed,
                                               std::size_t d_e, double tau,
                                               std::size_t d_t,
                                               EpisodeSettings settings) {
  Rng rng = Rng::substream(seed, "tradeoff-direction");
  Vector w(d_e);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& x : w) x = rng.normal();
    norm = l2_norm(w);
  }
  for (double& x : w) x /= norm;
  return make_tradeoff_env(Embedding(std::move(w)), tau, d_t,
                           std::move(settings));
}

EpisodeTrace run_episode(Environment& env, const SpeakerProfile& profile,
                         const TextFeatures& text,
                         std::span<const Action> actions) {
  EpisodeTrace trace;
  StateVector state = env.reset(profile, text);
  trace.initial_fused = env.initial_fused();
  for (const Action& action : actions) {
    if (env.done()) break;
    Transition t = env.step(action);
    trace.steps.push_back(
        {std::move(state), action, t.score, t.fused, t.reward, t.done});
    state = std::move(t.next_state);
  }
  return trace;
}

}  // namespace asrrl::env
