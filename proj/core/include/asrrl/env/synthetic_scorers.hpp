#ifndef ASRRL_ENV_SYNTHETIC_SCORERS_HPP_
#define ASRRL_ENV_SYNTHETIC_SCORERS_HPP_

#include <memory>

#include "asrrl/env/voice_model.hpp"
#include "asrrl/scoring/scorer.hpp"

namespace asrrl::env {

// Voiceprint cosine similarity against context.target, mapped to [0, 1].
class SimilarityScorer : public scoring::Scorer {
 public:
  explicit SimilarityScorer(std::shared_ptr<const VoiceModel> model)
      : model_(std::move(model)) {}
  scoring::ScoreKind kind() const override { return scoring::ScoreKind::sim; }
  double score(const SpeechFeatures& speech,
               const scoring::ScoreContext& context) const override;

 private:
  std::shared_ptr<const VoiceModel> model_;
};

// Quality shell: 5 inside the radius, decaying outside. Reads
// context.embedding.
class QualityScorer : public scoring::Scorer {
 public:
  explicit QualityScorer(std::shared_ptr<const VoiceModel> model)
      : model_(std::move(model)) {}
  scoring::ScoreKind kind() const override { return scoring::ScoreKind::mos; }
  double score(const SpeechFeatures& speech,
               const scoring::ScoreContext& context) const override;

 private:
  std::shared_ptr<const VoiceModel> model_;
};

class IntelligibilityScorer : public scoring::Scorer {
 public:
  explicit IntelligibilityScorer(std::shared_ptr<const VoiceModel> model)
      : model_(std::move(model)) {}
  scoring::ScoreKind kind() const override { return scoring::ScoreKind::intell; }
  double score(const SpeechFeatures& speech,
               const scoring::ScoreContext& context) const override;

 private:
  std::shared_ptr<const VoiceModel> model_;
};

scoring::ScorerSet synthetic_scorers(std::shared_ptr<const VoiceModel> model);

}  // namespace asrrl::env

#endif  // ASRRL_ENV_SYNTHETIC_SCORERS_HPP_
