#include "asrrl/scoring/scorer.hpp"

#include <cmath>
#include <string>

#include "asrrl/core/error.hpp"
#include "asrrl/core/numeric_text.hpp"

namespace asrrl::scoring {

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::sim:
      return "sim";
    case ScoreKind::mos:
      return "mos";
    case ScoreKind::intell:
      return "intell";
  }
  return "?";
}

ScoreKind parse_score_kind(std::string_view text) {
  if (text == "sim") return ScoreKind::sim;
  if (text == "mos") return ScoreKind::mos;
  if (text == "intell") return ScoreKind::intell;
  throw ConfigError("unknown score kind '" + std::string(text) + "'");
}

ScoreRange declared_range(ScoreKind kind) {
  return kind == ScoreKind::mos ? ScoreRange{0.0, kMaxMos}
                                : ScoreRange{0.0, 1.0};
}

double score_speech(const Scorer& scorer, const SpeechFeatures& speech,
                    const ScoreContext& context) {
  const double value = scorer.score(speech, context);
  const ScoreRange range = declared_range(scorer.kind());
  if (!std::isfinite(value) || value < range.lo || value > range.hi) {
    throw ScoreRangeError(std::string(to_string(scorer.kind())) +
                          " scorer returned " + format_double(value) +
                          " outside [" + format_double(range.lo) + ", " +
                          format_double(range.hi) + "]");
  }
  return value;
}

ScoreTriple ScorerSet::score(const SpeechFeatures& speech,
                             const ScoreContext& context) const {
  if (!sim || !mos || !intell) throw ConfigError("scorer set is incomplete");
  return {score_speech(*sim, speech, context),
          score_speech(*mos, speech, context),
          score_speech(*intell, speech, context)};
}

}  // namespace asrrl::scoring
