#ifndef ASRRL_HARNESS_CORPUS_HPP_
#define ASRRL_HARNESS_CORPUS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "asrrl/env/voice_model.hpp"

namespace asrrl::harness {

struct SpeakerRecord {
  env::SpeakerProfile profile;
  std::vector<TextFeatures> texts;

  friend bool operator==(const SpeakerRecord&, const SpeakerRecord&) = default;
};

// Synthetic stand-in for a speech dataset: speakers with hidden true
// embeddings, noisy references and per-speaker text features. The voice
// model is not stored; it is re-drawn from (params, seed).
struct Corpus {
  env::VoiceSpaceParams params;
  std::uint64_t seed = 0;
  std::vector<SpeakerRecord> speakers;

  std::size_t k_refs() const;
  std::shared_ptr<const env::VoiceModel> voice_model() const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct CorpusOptions {
  std::uint64_t seed = 0;
  std::size_t speakers = 50;
  std::size_t refs = 1;
  std::size_t texts_per_speaker = 10;
  env::VoiceSpaceParams params;  // d_e, d_t and the rest of the voice space

  void validate() const;
};

Corpus gen_corpus(const CorpusOptions& options);

std::string corpus_to_text(const Corpus& corpus);
// Throws IoError naming the line of the first malformed record.
Corpus corpus_from_text(std::string_view text);

// Refuses to replace an existing file unless force is set.
void write_corpus(const Corpus& corpus, const std::filesystem::path& path,
                  bool force);
Corpus read_corpus(const std::filesystem::path& path);

enum class Split { train, eval, all };

Split parse_split(std::string_view text);
std::string_view to_string(Split split);

// Training speakers come first; the last ceil(fraction * n) are held out.
// Both sides are kept nonempty when n >= 2.
std::vector<std::size_t> split_indices(std::size_t n_speakers,
                                       double eval_fraction, Split split);

}  // namespace asrrl::harness

#endif  // ASRRL_HARNESS_CORPUS_HPP_
