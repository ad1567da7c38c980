#ifndef ASRRL_CORE_TYPES_HPP_
#define ASRRL_CORE_TYPES_HPP_

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace asrrl {

using Vector = std::vector<double>;

// Fixed-length real vector tagged with its domain role, so an embedding
// cannot be passed where text features are expected.
template <class Tag>
class RealVector {
 public:
  RealVector() = default;
  explicit RealVector(Vector values) : values_(std::move(values)) {}
  RealVector(std::initializer_list<double> values) : values_(values) {}
  explicit RealVector(std::size_t size, double fill = 0.0)
      : values_(size, fill) {}

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  const Vector& values() const { return values_; }
  Vector& values() { return values_; }
  std::span<const double> span() const { return values_; }
  std::span<double> span() { return values_; }

  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const RealVector&, const RealVector&) = default;

 private:
  Vector values_;
};

using Embedding = RealVector<struct EmbeddingTag>;
using TextFeatures = RealVector<struct TextFeaturesTag>;
using Voiceprint = RealVector<struct VoiceprintTag>;
using SpeechFeatures = RealVector<struct SpeechFeaturesTag>;

enum class Scenario { single_sentence, few_sentence };

std::string_view to_string(Scenario scenario);
Scenario parse_scenario(std::string_view text);

double l2_norm(std::span<const double> v);
double linf_distance(std::span<const double> a, std::span<const double> b);

}  // namespace asrrl

#endif  // ASRRL_CORE_TYPES_HPP_
