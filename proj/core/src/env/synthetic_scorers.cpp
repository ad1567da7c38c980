#include "asrrl/env/synthetic_scorers.hpp"

#include "asrrl/core/error.hpp"

namespace asrrl::env {

namespace {

const Embedding& require_embedding(const scoring::ScoreContext& context,
                                   const char* who) {
  if (!context.embedding) {
    throw ConfigError(std::string(who) + " needs the embedding in its context");
  }
  return *context.embedding;
}

}  // namespace

double SimilarityScorer::score(const SpeechFeatures& speech,
                               const scoring::ScoreContext& context) const {
  if (!context.target) {
    throw ConfigError("similarity scorer needs a target voiceprint");
  }
  return model_->similarity(model_->voiceprint(speech), *context.target);
}

double QualityScorer::score(const SpeechFeatures&,
                            const scoring::ScoreContext& context) const {
  return model_->quality(require_embedding(context, "quality scorer"));
}

double IntelligibilityScorer::score(const SpeechFeatures&,
                                    const scoring::ScoreContext& context) const {
  return model_->intelligibility_error(
      require_embedding(context, "intelligibility scorer"));
}

scoring::ScorerSet synthetic_scorers(std::shared_ptr<const VoiceModel> model) {
  return {std::make_shared<SimilarityScorer>(model),
          std::make_shared<QualityScorer>(model),
          std::make_shared<IntelligibilityScorer>(model)};
}

}  // namespace asrrl::env
