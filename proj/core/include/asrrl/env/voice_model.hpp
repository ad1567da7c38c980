#ifndef ASRRL_ENV_VOICE_MODEL_HPP_
#define ASRRL_ENV_VOICE_MODEL_HPP_

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "asrrl/core/rng.hpp"
#include "asrrl/core/types.hpp"
#include "asrrl/scoring/score_triple.hpp"

namespace asrrl::env {

// Shape of the synthetic voice space. Everything here is recorded in the
// corpus header so an environment can be rebuilt from the corpus alone.
struct VoiceSpaceParams {
  std::size_t d_e = 16;
  std::size_t d_t = 8;
  std::size_t d_s = 32;
  std::size_t d_v = 16;
  // speakers live on a rank-r subspace of the embedding space
  std::size_t speaker_rank = 2;
  double speaker_sigma = 0.05;
  double ref_sigma = 0.05;
  double text_gain = 0.2;
  double embedding_gain = 8.0;
  double bias_sigma = 0.0;
  double beta = 1.0;
  double kappa = 1.0;
  // <= 0 selects 1.5 * E[||e*||]
  double radius = 0.0;

  static VoiceSpaceParams defaults_for(std::size_t d_e, std::size_t d_t);
  void validate() const;
  // 1.5 * E||e*|| under the speaker distribution, or `radius` when set
  double quality_radius() const;
  double expected_speaker_norm() const;

  friend bool operator==(const VoiceSpaceParams&,
                         const VoiceSpaceParams&) = default;
};

// Frozen stand-in for the pretrained TTS model and the voiceprint extractor.
// Matrices are drawn once from the seed and never change.
class VoiceModel {
 public:
  VoiceModel(const VoiceSpaceParams& params, std::uint64_t seed);

  const VoiceSpaceParams& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }

  // s_s = tanh(W1 f_t + W2 e + b)
  SpeechFeatures synth(const TextFeatures& text,
                       const Embedding& embedding) const;
  Voiceprint voiceprint(const SpeechFeatures& speech) const;
  // encoder re-applied to synthesized speech (posterior embedding)
  Embedding encode(const SpeechFeatures& speech) const;

  const TextFeatures& calibration_text() const { return calibration_text_; }
  Voiceprint target_voiceprint(const Embedding& true_embedding) const;

  // Component scores under the synthetic model.
  double similarity(const Voiceprint& produced, const Voiceprint& target) const;
  double quality(const Embedding& embedding) const;
  double intelligibility_error(const Embedding& embedding) const;
  ScoreTriple score(const TextFeatures& text, const Embedding& embedding,
                    const Voiceprint& target) const;

  double radius() const { return radius_; }

  // spectral norms used by the oracle's resolution slack
  double voiceprint_norm_bound() const { return v_norm_ * w2_norm_; }

  const Eigen::MatrixXd& text_weights() const { return w1_; }
  const Eigen::MatrixXd& embedding_weights() const { return w2_; }
  const Eigen::VectorXd& bias() const { return b_; }
  const Eigen::MatrixXd& voiceprint_projection() const { return v_; }

 private:
  void check_dims(const TextFeatures& text, const Embedding& embedding) const;

  VoiceSpaceParams params_;
  std::uint64_t seed_;
  Eigen::MatrixXd w1_;
  Eigen::MatrixXd w2_;
  Eigen::VectorXd b_;
  Eigen::MatrixXd v_;
  Eigen::MatrixXd encoder_;
  TextFeatures calibration_text_;
  double radius_;
  double v_norm_;
  double w2_norm_;
};

struct SpeakerProfile {
  std::uint64_t id = 0;
  Embedding true_embedding;
  std::vector<Embedding> refs;
  Voiceprint target_voiceprint;

  std::size_t k() const { return refs.size(); }
  // copy restricted to the first n references
  SpeakerProfile with_refs(std::size_t n) const;

  friend bool operator==(const SpeakerProfile&, const SpeakerProfile&) = default;
};

// Draws a speaker: e* = B z on the speaker subspace, refs = e* + N(0, ref_sigma).
// `basis` is d_e x rank with orthonormal columns.
SpeakerProfile draw_speaker(const VoiceModel& model,
                            const Eigen::MatrixXd& basis, std::uint64_t id,
                            std::size_t k_refs, Rng& rng);

Eigen::MatrixXd draw_speaker_basis(const VoiceSpaceParams& params,
                                   std::uint64_t seed);

}  // namespace asrrl::env

#endif  // ASRRL_ENV_VOICE_MODEL_HPP_
