#include "asrrl/env/voice_model.hpp"

#include <cmath>
#include <mutex>
#include <spdlog/spdlog.h>

#include "asrrl/core/error.hpp"
#include "asrrl/core/rng.hpp"

namespace asrrl::env {

namespace {

Eigen::MatrixXd gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                                double stddev) {
  Eigen::MatrixXd m(rows, cols);
  // row-major fill order keeps the draw sequence independent of Eigen's
  // storage order
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  }
  return m;
}

Eigen::Map<const Eigen::VectorXd> view(const Vector& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

double spectral_norm(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

void warn_zero_voiceprint() {
  static std::once_flag once;
  std::call_once(once, [] {
    spdlog::warn(
        "zero-norm voiceprint encountered; similarity set to 0.5 "
        "(further occurrences are not logged)");
  });
}

}  // namespace

VoiceSpaceParams VoiceSpaceParams::defaults_for(std::size_t d_e,
                                                std::size_t d_t) {
  VoiceSpaceParams p;
  p.d_e = d_e;
  p.d_t = d_t;
  p.speaker_rank = std::max<std::size_t>(1, (d_e + 7) / 8);
  return p;
}

void VoiceSpaceParams::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("voice space: ") + what);
  };
  need(d_e >= 1, "d_e must be >= 1");
  need(d_t >= 1, "d_t must be >= 1");
  need(d_s >= 1, "d_s must be >= 1");
  need(d_v >= 1, "d_v must be >= 1");
  need(speaker_rank >= 1 && speaker_rank <= d_e,
       "speaker_rank must be in [1, d_e]");
  need(speaker_sigma > 0.0, "speaker_sigma must be > 0");
  need(ref_sigma >= 0.0, "ref_sigma must be >= 0");
  need(text_gain >= 0.0, "text_gain must be >= 0");
  need(embedding_gain > 0.0, "embedding_gain must be > 0");
  need(bias_sigma >= 0.0, "bias_sigma must be >= 0");
  need(beta > 0.0, "beta must be > 0");
  need(kappa > 0.0, "kappa must be > 0");
}

double VoiceSpaceParams::expected_speaker_norm() const {
  // ||e*|| = speaker_sigma * chi(rank)
  const double r = static_cast<double>(speaker_rank);
  return speaker_sigma * std::sqrt(2.0) *
         std::exp(std::lgamma((r + 1.0) / 2.0) - std::lgamma(r / 2.0));
}

double VoiceSpaceParams::quality_radius() const {
  return radius > 0.0 ? radius : 1.5 * expected_speaker_norm();
}

VoiceModel::VoiceModel(const VoiceSpaceParams& params, std::uint64_t seed)
    : params_(params), seed_(seed) {
  params_.validate();
  Rng rng = Rng::substream(seed, "voice-model");
  const auto& p = params_;
  w1_ = gaussian_matrix(rng, p.d_s, p.d_t,
                        p.text_gain / std::sqrt(static_cast<double>(p.d_t)));
  w2_ = gaussian_matrix(rng, p.d_s, p.d_e,
                        p.embedding_gain / std::sqrt(static_cast<double>(p.d_e)));
  b_ = gaussian_matrix(rng, p.d_s, 1, p.bias_sigma).col(0);
  v_ = gaussian_matrix(rng, p.d_v, p.d_s,
                       1.0 / std::sqrt(static_cast<double>(p.d_s)));
  encoder_ = gaussian_matrix(rng, p.d_e, p.d_s,
                             1.0 / std::sqrt(static_cast<double>(p.d_s)));
  Vector cal(p.d_t);
  for (double& x : cal) x = rng.normal();
  calibration_text_ = TextFeatures(std::move(cal));
  radius_ = p.quality_radius();
  v_norm_ = spectral_norm(v_);
  w2_norm_ = spectral_norm(w2_);
}

void VoiceModel::check_dims(const TextFeatures& text,
                            const Embedding& embedding) const {
  if (text.size() != params_.d_t) {
    throw DimensionError("synth: text features have length " +
                         std::to_string(text.size()) + ", model expects d_t = " +
                         std::to_string(params_.d_t));
  }
  if (embedding.size() != params_.d_e) {
    throw DimensionError("synth: embedding has length " +
                         std::to_string(embedding.size()) +
                         ", model expects d_e = " + std::to_string(params_.d_e));
  }
}

SpeechFeatures VoiceModel::synth(const TextFeatures& text,
                                 const Embedding& embedding) const {
  check_dims(text, embedding);
  Eigen::VectorXd pre =
      w1_ * view(text.values()) + w2_ * view(embedding.values()) + b_;
  Vector out(params_.d_s);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::tanh(pre(static_cast<Eigen::Index>(i)));
  }
  return SpeechFeatures(std::move(out));
}

Voiceprint VoiceModel::voiceprint(const SpeechFeatures& speech) const {
  if (speech.size() != params_.d_s) {
    throw DimensionError("voiceprint: speech has length " +
                         std::to_string(speech.size()) + ", expected " +
                         std::to_string(params_.d_s));
  }
  Eigen::VectorXd vp = v_ * view(speech.values());
  return Voiceprint(Vector(vp.data(), vp.data() + vp.size()));
}

Embedding VoiceModel::encode(const SpeechFeatures& speech) const {
  if (speech.size() != params_.d_s) {
    throw DimensionError("encode: speech has length " +
                         std::to_string(speech.size()) + ", expected " +
                         std::to_string(params_.d_s));
  }
  Eigen::VectorXd e = encoder_ * view(speech.values());
  return Embedding(Vector(e.data(), e.data() + e.size()));
}

Voiceprint VoiceModel::target_voiceprint(const Embedding& true_embedding) const {
  return voiceprint(synth(calibration_text_, true_embedding));
}

double VoiceModel::similarity(const Voiceprint& produced,
                              const Voiceprint& target) const {
  if (produced.size() != target.size()) {
    throw DimensionError("similarity: voiceprint lengths differ");
  }
  const double np = l2_norm(produced.span());
  const double nt = l2_norm(target.span());
  if (np == 0.0 || nt == 0.0) {
    warn_zero_voiceprint();
    return 0.5;
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < produced.size(); ++i) {
    dot += produced[i] * target[i];
  }
  const double cosine = std::clamp(dot / (np * nt), -1.0, 1.0);
  return 0.5 * (1.0 + cosine);
}

double VoiceModel::quality(const Embedding& embedding) const {
  const double excess = std::max(0.0, l2_norm(embedding.span()) - radius_);
  return kMaxMos * std::exp(-params_.beta * excess);
}

double VoiceModel::intelligibility_error(const Embedding& embedding) const {
  const double excess = std::max(0.0, l2_norm(embedding.span()) - radius_);
  return 1.0 - std::exp(-params_.kappa * excess);
}

ScoreTriple VoiceModel::score(const TextFeatures& text,
                              const Embedding& embedding,
                              const Voiceprint& target) const {
  const Voiceprint produced = voiceprint(synth(text, embedding));
  return {similarity(produced, target), quality(embedding),
          intelligibility_error(embedding)};
}

SpeakerProfile SpeakerProfile::with_refs(std::size_t n) const {
  if (n < 1 || n > refs.size()) {
    throw ConfigError("speaker " + std::to_string(id) + " has " +
                      std::to_string(refs.size()) + " references, " +
                      std::to_string(n) + " requested");
  }
  SpeakerProfile copy = *this;
  copy.refs.resize(n);
  return copy;
}

Eigen::MatrixXd draw_speaker_basis(const VoiceSpaceParams& params,
                                   std::uint64_t seed) {
  Rng rng = Rng::substream(seed, "speaker-basis");
  Eigen::MatrixXd raw = gaussian_matrix(rng, params.d_e, params.speaker_rank, 1.0);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd q = qr.householderQ() *
                      Eigen::MatrixXd::Identity(params.d_e, params.speaker_rank);
  return q;
}

SpeakerProfile draw_speaker(const VoiceModel& model,
                            const Eigen::MatrixXd& basis, std::uint64_t id,
                            std::size_t k_refs, Rng& rng) {
  const auto& p = model.params();
  if (k_refs < 1) throw ConfigError("draw_speaker: k_refs must be >= 1");
  Eigen::VectorXd z(p.speaker_rank);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z(i) = rng.normal(0.0, p.speaker_sigma);
  }
  Eigen::VectorXd e = basis * z;
  SpeakerProfile profile;
  profile.id = id;
  profile.true_embedding = Embedding(Vector(e.data(), e.data() + e.size()));
  for (std::size_t r = 0; r < k_refs; ++r) {
    Embedding ref = profile.true_embedding;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      ref[i] += rng.normal(0.0, p.ref_sigma);
    }
    profile.refs.push_back(std::move(ref));
  }
  profile.target_voiceprint = model.target_voiceprint(profile.true_embedding);
  return profile;
}

}  // namespace asrrl::env
