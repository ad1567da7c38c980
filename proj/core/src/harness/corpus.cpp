#include "asrrl/harness/corpus.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "asrrl/core/error.hpp"
#include "asrrl/core/numeric_text.hpp"

namespace asrrl::harness {

namespace {

constexpr std::string_view kMagic = "ASRRL-CORPUS";
constexpr std::string_view kVersion = "v1";

std::string join_vectors(const std::vector<Embedding>& vs) {
  std::string out;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ';';
    out += format_doubles(vs[i].span());
  }
  return out;
}

std::string join_texts(const std::vector<TextFeatures>& vs) {
  std::string out;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ';';
    out += format_doubles(vs[i].span());
  }
  return out;
}

[[noreturn]] void bad_line(std::size_t line, const std::string& what) {
  throw IoError("corpus line " + std::to_string(line) + ": " + what);
}

template <class V>
V parse_vector(std::string_view field, std::size_t expected, std::size_t line,
               const char* what) {
  std::vector<double> values;
  try {
    values = parse_doubles(field, ',', what);
  } catch (const ConfigError& e) {
    bad_line(line, e.what());
  }
  if (values.size() != expected) {
    bad_line(line, std::string(what) + " has " + std::to_string(values.size()) +
                       " values, expected " + std::to_string(expected));
  }
  return V(std::move(values));
}

}  // namespace

std::size_t Corpus::k_refs() const {
  return speakers.empty() ? 0 : speakers.front().profile.k();
}

std::shared_ptr<const env::VoiceModel> Corpus::voice_model() const {
  return std::make_shared<const env::VoiceModel>(params, seed);
}

void CorpusOptions::validate() const {
  if (speakers < 1) throw ConfigError("gen-data: speakers must be >= 1");
  if (refs < 1) throw ConfigError("gen-data: refs must be >= 1");
  if (texts_per_speaker < 1) {
    throw ConfigError("gen-data: texts per speaker must be >= 1");
  }
  params.validate();
}

Corpus gen_corpus(const CorpusOptions& options) {
  options.validate();
  Corpus corpus;
  corpus.params = options.params;
  corpus.seed = options.seed;
  const auto model = corpus.voice_model();
  const Eigen::MatrixXd basis =
      env::draw_speaker_basis(options.params, options.seed);
  Rng rng = Rng::substream(options.seed, "corpus");
  for (std::size_t s = 0; s < options.speakers; ++s) {
    SpeakerRecord rec;
    rec.profile = env::draw_speaker(*model, basis, s, options.refs, rng);
    for (std::size_t t = 0; t < options.texts_per_speaker; ++t) {
      Vector f(options.params.d_t);
      for (double& x : f) x = rng.normal();
      rec.texts.emplace_back(std::move(f));
    }
    corpus.speakers.push_back(std::move(rec));
  }
  return corpus;
}

std::string corpus_to_text(const Corpus& corpus) {
  const auto& p = corpus.params;
  std::ostringstream os;
  os << kMagic << ' ' << kVersion << " d_e=" << p.d_e << " d_t=" << p.d_t
     << " seed=" << corpus.seed << " d_s=" << p.d_s << " d_v=" << p.d_v
     << " rank=" << p.speaker_rank
     << " speaker_sigma=" << format_double(p.speaker_sigma)
     << " ref_sigma=" << format_double(p.ref_sigma)
     << " text_gain=" << format_double(p.text_gain)
     << " embedding_gain=" << format_double(p.embedding_gain)
     << " bias_sigma=" << format_double(p.bias_sigma)
     << " beta=" << format_double(p.beta) << " kappa=" << format_double(p.kappa)
     << " radius=" << format_double(p.radius)
     << " speakers=" << corpus.speakers.size() << '\n';
  for (const auto& rec : corpus.speakers) {
    os << rec.profile.id << '\t' << format_doubles(rec.profile.true_embedding.span())
       << '\t' << join_vectors(rec.profile.refs) << '\t'
       << format_doubles(rec.profile.target_voiceprint.span()) << '\t'
       << join_texts(rec.texts) << '\n';
  }
  return os.str();
}

Corpus corpus_from_text(std::string_view text) {
  std::size_t line_no = 1;
  const auto eol = text.find('\n');
  const std::string_view header = text.substr(0, eol);
  const auto words = split(header, ' ');
  if (words.size() < 2 || words[0] != kMagic) {
    bad_line(1, "missing ASRRL-CORPUS header");
  }
  if (words[1] != kVersion) {
    bad_line(1, "unsupported corpus version '" + std::string(words[1]) + "'");
  }
  std::map<std::string, std::string, std::less<>> kv;
  for (std::size_t i = 2; i < words.size(); ++i) {
    const auto eq = words[i].find('=');
    if (eq == std::string_view::npos) {
      bad_line(1, "malformed header field '" + std::string(words[i]) + "'");
    }
    kv[std::string(words[i].substr(0, eq))] = std::string(words[i].substr(eq + 1));
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) bad_line(1, std::string("header lacks ") + key);
    return it->second;
  };

  Corpus corpus;
  auto& p = corpus.params;
  try {
    p.d_e = parse_u64(get("d_e"), "d_e");
    p.d_t = parse_u64(get("d_t"), "d_t");
    corpus.seed = parse_u64(get("seed"), "seed");
    // older headers carry only the mandatory fields; fall back to defaults
    p = env::VoiceSpaceParams::defaults_for(p.d_e, p.d_t);
    if (kv.count("d_s")) p.d_s = parse_u64(kv["d_s"], "d_s");
    if (kv.count("d_v")) p.d_v = parse_u64(kv["d_v"], "d_v");
    if (kv.count("rank")) p.speaker_rank = parse_u64(kv["rank"], "rank");
    if (kv.count("speaker_sigma")) p.speaker_sigma = parse_double(kv["speaker_sigma"]);
    if (kv.count("ref_sigma")) p.ref_sigma = parse_double(kv["ref_sigma"]);
    if (kv.count("text_gain")) p.text_gain = parse_double(kv["text_gain"]);
    if (kv.count("embedding_gain")) p.embedding_gain = parse_double(kv["embedding_gain"]);
    if (kv.count("bias_sigma")) p.bias_sigma = parse_double(kv["bias_sigma"]);
    if (kv.count("beta")) p.beta = parse_double(kv["beta"]);
    if (kv.count("kappa")) p.kappa = parse_double(kv["kappa"]);
    if (kv.count("radius")) p.radius = parse_double(kv["radius"]);
    p.validate();
  } catch (const ConfigError& e) {
    bad_line(1, e.what());
  }

  std::size_t pos = eol == std::string_view::npos ? text.size() : eol + 1;
  std::size_t k = 0;
  while (pos < text.size()) {
    ++line_no;
    auto next = text.find('\n', pos);
    if (next == std::string_view::npos) next = text.size();
    const std::string_view line = text.substr(pos, next - pos);
    pos = next + 1;
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 5) {
      bad_line(line_no, "expected 5 tab-separated fields, found " +
                            std::to_string(fields.size()));
    }
    SpeakerRecord rec;
    try {
      rec.profile.id = parse_u64(fields[0], "speaker id");
    } catch (const ConfigError& e) {
      bad_line(line_no, e.what());
    }
    rec.profile.true_embedding =
        parse_vector<Embedding>(fields[1], p.d_e, line_no, "true embedding");
    for (auto ref : split(fields[2], ';')) {
      rec.profile.refs.push_back(
          parse_vector<Embedding>(ref, p.d_e, line_no, "reference embedding"));
    }
    if (k == 0) k = rec.profile.refs.size();
    if (rec.profile.refs.size() != k) {
      bad_line(line_no, "reference count differs from earlier speakers");
    }
    rec.profile.target_voiceprint =
        parse_vector<Voiceprint>(fields[3], p.d_v, line_no, "voiceprint");
    for (auto t : split(fields[4], ';')) {
      rec.texts.push_back(
          parse_vector<TextFeatures>(t, p.d_t, line_no, "text features"));
    }
    corpus.speakers.push_back(std::move(rec));
  }
  if (kv.count("speakers")) {
    std::uint64_t declared = 0;
    try {
      declared = parse_u64(kv["speakers"], "speakers");
    } catch (const ConfigError& e) {
      bad_line(1, e.what());
    }
    if (declared != corpus.speakers.size()) {
      throw IoError("corpus: header declares " + std::to_string(declared) +
                    " speakers, file holds " +
                    std::to_string(corpus.speakers.size()) + " (truncated?)");
    }
  }
  if (corpus.speakers.empty()) throw IoError("corpus: no speaker records");
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path,
                  bool force) {
  if (!force && std::filesystem::exists(path)) {
    throw IoError("refusing to overwrite " + path.string() +
                  " (pass --force to replace it)");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << corpus_to_text(corpus);
  if (!out) throw IoError("short write to " + path.string());
}

Corpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read corpus " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return corpus_from_text(ss.str());
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "eval") return Split::eval;
  if (text == "all") return Split::all;
  throw ConfigError("unknown split '" + std::string(text) +
                    "' (expected train, eval or all)");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::eval: return "eval";
    case Split::all: return "all";
  }
  return "?";
}

std::vector<std::size_t> split_indices(std::size_t n_speakers,
                                       double eval_fraction, Split split) {
  if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) {
    throw ConfigError("eval fraction must lie in [0, 1)");
  }
  std::size_t n_eval = static_cast<std::size_t>(
      std::ceil(eval_fraction * static_cast<double>(n_speakers) - 1e-9));
  if (n_speakers >= 2) {
    n_eval = std::clamp<std::size_t>(n_eval, 1, n_speakers - 1);
  } else {
    n_eval = 0;
  }
  const std::size_t n_train = n_speakers - n_eval;
  std::vector<std::size_t> out;
  const std::size_t lo = split == Split::eval ? n_train : 0;
  const std::size_t hi = split == Split::train ? n_train : n_speakers;
  for (std::size_t i = lo; i < hi; ++i) out.push_back(i);
  if (out.empty()) {
    throw ConfigError("split '" + std::string(to_string(split)) + "' is empty");
  }
  return out;
}

}  // namespace asrrl::harness
