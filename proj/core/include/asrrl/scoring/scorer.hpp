#ifndef ASRRL_SCORING_SCORER_HPP_
#define ASRRL_SCORING_SCORER_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>

#include "asrrl/core/types.hpp"
#include "asrrl/scoring/score_triple.hpp"

namespace asrrl::scoring {

enum class ScoreKind { sim, mos, intell };

std::string_view to_string(ScoreKind kind);
ScoreKind parse_score_kind(std::string_view text);

struct ScoreRange {
  double lo;
  double hi;
};

ScoreRange declared_range(ScoreKind kind);

// What a scorer may need besides the speech: the target voiceprint for
// similarity, the reference text for intelligibility, and (for the synthetic
// quality model) the embedding that produced the speech.
struct ScoreContext {
  std::optional<Voiceprint> target;
  std::optional<std::uint64_t> text_id;
  std::optional<Embedding> embedding;
};

// A component scorer. Implementations must be reentrant and deterministic.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual ScoreKind kind() const = 0;
  virtual double score(const SpeechFeatures& speech,
                       const ScoreContext& context) const = 0;
};

// Runs the scorer and checks the result against the kind's declared range.
// Out-of-range values raise ScoreRangeError; transport problems surface as
// ScorerFault from the scorer itself.
double score_speech(const Scorer& scorer, const SpeechFeatures& speech,
                    const ScoreContext& context);

struct ScorerSet {
  std::shared_ptr<const Scorer> sim;
  std::shared_ptr<const Scorer> mos;
  std::shared_ptr<const Scorer> intell;

  ScoreTriple score(const SpeechFeatures& speech,
                    const ScoreContext& context) const;
};

}  // namespace asrrl::scoring

#endif  // ASRRL_SCORING_SCORER_HPP_
