#ifndef ASRRL_CORE_STATE_HPP_
#define ASRRL_CORE_STATE_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "asrrl/core/types.hpp"

namespace asrrl {

// Segment kinds in their fixed flattening order.
enum class SegmentKind {
  text,
  separator,
  embedding,
  prior_voiceprint,
  posterior_embedding,
  posterior_voiceprint,
};

std::string_view to_string(SegmentKind kind);

inline constexpr double kSeparatorValue = 0.0;

// Which segments appear in the state. The embedding and separator are always
// present; the text segment is on by default and can only be dropped by the
// state ablation.
struct SegmentMask {
  bool text = true;
  bool prior_voiceprint = false;
  bool posterior_embedding = false;
  bool posterior_voiceprint = false;

  bool enabled(SegmentKind kind) const;
  bool any_posterior() const {
    return posterior_embedding || posterior_voiceprint;
  }
  friend bool operator==(const SegmentMask&, const SegmentMask&) = default;
};

struct SegmentSpan {
  SegmentKind kind;
  std::size_t offset;
  std::size_t length;
};

struct StateLayout {
  std::size_t text_dim = 0;
  std::size_t embedding_dim = 0;
  std::size_t voiceprint_dim = 0;
  SegmentMask mask;

  std::size_t length(SegmentKind kind) const;
  std::size_t flat_size() const;
  // enabled segments in flattening order
  std::vector<SegmentSpan> segments() const;
  void validate() const;

  friend bool operator==(const StateLayout&, const StateLayout&) = default;
};

struct OptionalSegments {
  std::optional<Voiceprint> prior_voiceprint;
  std::optional<Embedding> posterior_embedding;
  std::optional<Voiceprint> posterior_voiceprint;
};

class StateVector {
 public:
  StateVector(StateLayout layout, Vector flat);

  const StateLayout& layout() const { return layout_; }
  const Vector& flat() const { return flat_; }
  std::size_t size() const { return flat_.size(); }

  // throws DimensionError when the segment is not enabled
  std::span<const double> segment(SegmentKind kind) const;
  Embedding embedding() const;

  friend bool operator==(const StateVector&, const StateVector&) = default;

 private:
  StateLayout layout_;
  Vector flat_;
};

// Concatenates [f_t | sep | e | f_rv? | e_s? | f_sv?] under the layout's mask.
// Every enabled segment must be supplied with its declared length.
StateVector flatten_state(const StateLayout& layout, const TextFeatures& text,
                          const Embedding& embedding,
                          const OptionalSegments& optional = {});

// Infers the dimensions from the arguments.
StateVector flatten_state(const TextFeatures& text, const Embedding& embedding,
                          const OptionalSegments& optional = {},
                          const SegmentMask& mask = {});

}  // namespace asrrl

#endif  // ASRRL_CORE_STATE_HPP_
