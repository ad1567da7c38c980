#include "asrrl/core/state.hpp"

#include <string>

#include "asrrl/core/error.hpp"

namespace asrrl {

namespace {

constexpr std::array<SegmentKind, 6> kOrder = {
    SegmentKind::text,
    SegmentKind::separator,
    SegmentKind::embedding,
    SegmentKind::prior_voiceprint,
    SegmentKind::posterior_embedding,
    SegmentKind::posterior_voiceprint,
};

void append_checked(Vector& out, std::span<const double> values,
                    std::size_t expected, SegmentKind kind) {
  if (values.size() != expected) {
    throw DimensionError("state segment '" + std::string(to_string(kind)) +
                         "' has length " + std::to_string(values.size()) +
                         ", expected " + std::to_string(expected));
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw DimensionError("state segment '" + std::string(to_string(kind)) +
                           "' contains a non-finite value");
    }
  }
  out.insert(out.end(), values.begin(), values.end());
}

template <class T>
std::span<const double> require(const std::optional<T>& segment,
                                SegmentKind kind) {
  if (!segment) {
    throw DimensionError("state segment '" + std::string(to_string(kind)) +
                         "' is enabled but was not supplied");
  }
  return segment->span();
}

}  // namespace

std::string_view to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::text:
      return "f_t";
    case SegmentKind::separator:
      return "sep";
    case SegmentKind::embedding:
      return "e";
    case SegmentKind::prior_voiceprint:
      return "f_rv";
    case SegmentKind::posterior_embedding:
      return "e_s";
    case SegmentKind::posterior_voiceprint:
      return "f_sv";
  }
  return "?";
}

bool SegmentMask::enabled(SegmentKind kind) const {
  switch (kind) {
    case SegmentKind::text:
      return text;
    case SegmentKind::separator:
    case SegmentKind::embedding:
      return true;
    case SegmentKind::prior_voiceprint:
      return prior_voiceprint;
    case SegmentKind::posterior_embedding:
      return posterior_embedding;
    case SegmentKind::posterior_voiceprint:
      return posterior_voiceprint;
  }
  return false;
}

std::size_t StateLayout::length(SegmentKind kind) const {
  switch (kind) {
    case SegmentKind::text:
      return text_dim;
    case SegmentKind::separator:
      return 1;
    case SegmentKind::embedding:
    case SegmentKind::posterior_embedding:
      return embedding_dim;
    case SegmentKind::prior_voiceprint:
    case SegmentKind::posterior_voiceprint:
      return voiceprint_dim;
  }
  return 0;
}

std::vector<SegmentSpan> StateLayout::segments() const {
  std::vector<SegmentSpan> out;
  std::size_t offset = 0;
  for (SegmentKind kind : kOrder) {
    if (!mask.enabled(kind)) continue;
    out.push_back({kind, offset, length(kind)});
    offset += length(kind);
  }
  return out;
}

std::size_t StateLayout::flat_size() const {
  std::size_t total = 0;
  for (const auto& s : segments()) total += s.length;
  return total;
}

void StateLayout::validate() const {
  if (text_dim < 1) throw DimensionError("state layout: d_t must be >= 1");
  if (embedding_dim < 1) throw DimensionError("state layout: d_e must be >= 1");
  if ((mask.prior_voiceprint || mask.posterior_voiceprint) &&
      voiceprint_dim < 1) {
    throw DimensionError(
        "state layout: voiceprint segments enabled but d_v is 0");
  }
}

StateVector::StateVector(StateLayout layout, Vector flat)
    : layout_(layout), flat_(std::move(flat)) {
  if (flat_.size() != layout_.flat_size()) {
    throw DimensionError("state vector has length " +
                         std::to_string(flat_.size()) + ", layout expects " +
                         std::to_string(layout_.flat_size()));
  }
}

std::span<const double> StateVector::segment(SegmentKind kind) const {
  for (const auto& s : layout_.segments()) {
    if (s.kind == kind) {
      return std::span<const double>(flat_).subspan(s.offset, s.length);
    }
  }
  throw DimensionError("state segment '" + std::string(to_string(kind)) +
                       "' is not enabled");
}

Embedding StateVector::embedding() const {
  auto s = segment(SegmentKind::embedding);
  return Embedding(Vector(s.begin(), s.end()));
}

StateVector flatten_state(const StateLayout& layout, const TextFeatures& text,
                          const Embedding& embedding,
                          const OptionalSegments& optional) {
  layout.validate();
  Vector flat;
  flat.reserve(layout.flat_size());
  const SegmentMask& mask = layout.mask;
  // the text is validated even when masked out of the observation
  if (text.size() != layout.text_dim || text.empty()) {
    throw DimensionError("state segment 'f_t' has length " +
                         std::to_string(text.size()) + ", expected " +
                         std::to_string(layout.text_dim));
  }
  if (mask.text) {
    append_checked(flat, text.span(), layout.text_dim, SegmentKind::text);
  }
  flat.push_back(kSeparatorValue);
  append_checked(flat, embedding.span(), layout.embedding_dim,
                 SegmentKind::embedding);
  if (mask.prior_voiceprint) {
    append_checked(flat,
                   require(optional.prior_voiceprint,
                           SegmentKind::prior_voiceprint),
                   layout.voiceprint_dim, SegmentKind::prior_voiceprint);
  }
  if (mask.posterior_embedding) {
    append_checked(flat,
                   require(optional.posterior_embedding,
                           SegmentKind::posterior_embedding),
                   layout.embedding_dim, SegmentKind::posterior_embedding);
  }
  if (mask.posterior_voiceprint) {
    append_checked(flat,
                   require(optional.posterior_voiceprint,
                           SegmentKind::posterior_voiceprint),
                   layout.voiceprint_dim, SegmentKind::posterior_voiceprint);
  }
  return StateVector(layout, std::move(flat));
}

StateVector flatten_state(const TextFeatures& text, const Embedding& embedding,
                          const OptionalSegments& optional,
                          const SegmentMask& mask) {
  StateLayout layout;
  layout.text_dim = text.size();
  layout.embedding_dim = embedding.size();
  layout.mask = mask;
  if (optional.prior_voiceprint) {
    layout.voiceprint_dim = optional.prior_voiceprint->size();
  } else if (optional.posterior_voiceprint) {
    layout.voiceprint_dim = optional.posterior_voiceprint->size();
  }
  return flatten_state(layout, text, embedding, optional);
}

}  // namespace asrrl
