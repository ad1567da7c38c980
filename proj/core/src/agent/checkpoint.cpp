#include "asrrl/agent/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "asrrl/core/error.hpp"
#include "json.hpp"

namespace asrrl::agent {

namespace {

using nlohmann::json;

// Best-effort location of a key in the raw text, for error reporting.
std::size_t locate(std::string_view text, const std::string& key) {
  const std::string quoted = "\"" + key + "\"";
  const auto pos = text.find(quoted);
  return pos == std::string_view::npos ? CheckpointError::npos : pos;
}

[[noreturn]] void fail(std::string_view text, const std::string& key,
                       const std::string& what) {
  const std::size_t at = locate(text, key);
  if (at == CheckpointError::npos) throw CheckpointError("checkpoint: " + what);
  throw CheckpointError("checkpoint: " + what, at);
}

json spec_to_json(const PolicySpec& spec) {
  const auto& m = spec.layout.mask;
  return json{{"scenario", std::string(to_string(spec.scenario))},
              {"d_t", spec.layout.text_dim},
              {"d_e", spec.layout.embedding_dim},
              {"d_v", spec.layout.voiceprint_dim},
              {"mask",
               {{"text", m.text},
                {"prior_voiceprint", m.prior_voiceprint},
                {"posterior_embedding", m.posterior_embedding},
                {"posterior_voiceprint", m.posterior_voiceprint}}},
              {"action_dim", spec.action_dim},
              {"encoder", std::string(to_string(spec.encoder))},
              {"hidden", spec.hidden},
              {"layers", spec.layers}};
}

PolicySpec spec_from_json(const json& j) {
  PolicySpec spec;
  spec.scenario = parse_scenario(j.at("scenario").get<std::string>());
  spec.layout.text_dim = j.at("d_t").get<std::size_t>();
  spec.layout.embedding_dim = j.at("d_e").get<std::size_t>();
  spec.layout.voiceprint_dim = j.at("d_v").get<std::size_t>();
  const json& m = j.at("mask");
  spec.layout.mask.text = m.at("text").get<bool>();
  spec.layout.mask.prior_voiceprint = m.at("prior_voiceprint").get<bool>();
  spec.layout.mask.posterior_embedding =
      m.at("posterior_embedding").get<bool>();
  spec.layout.mask.posterior_voiceprint =
      m.at("posterior_voiceprint").get<bool>();
  spec.action_dim = j.at("action_dim").get<std::size_t>();
  spec.encoder = parse_encoder(j.at("encoder").get<std::string>());
  spec.hidden = j.at("hidden").get<int>();
  spec.layers = j.at("layers").get<int>();
  return spec;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
  json config = json::object();
  for (const auto& [key, value] : checkpoint.config.to_map()) {
    config[key] = value;
  }
  config["policy"] = spec_to_json(checkpoint.policy.spec());

  json params = json::object();
  for (const auto& p : checkpoint.policy.parameters()) {
    std::vector<double> data(p.value.data(), p.value.data() + p.value.size());
    params[p.name] = {{"shape", {p.value.rows(), p.value.cols()}},
                      {"data", std::move(data)}};
  }
  json doc = {{"version", kCheckpointVersion},
              {"config", std::move(config)},
              {"step", checkpoint.step},
              {"rng", checkpoint.rng.state_hex()},
              {"params", std::move(params)}};
  return doc.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte is 1-based and points just past the offending character
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    throw CheckpointError(std::string("checkpoint: malformed JSON: ") + e.what(),
                          at);
  }
  if (!doc.is_object()) throw CheckpointError("checkpoint: not a JSON object", 0);
  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    fail(text, "version", "missing or non-integer version");
  }
  const int version = doc["version"].get<int>();
  if (version != kCheckpointVersion) {
    fail(text, "version",
         "unsupported version " + std::to_string(version) + " (expected " +
             std::to_string(kCheckpointVersion) + ")");
  }
  for (const char* key : {"config", "step", "rng", "params"}) {
    if (!doc.contains(key)) {
      throw CheckpointError(std::string("checkpoint: missing '") + key + "'");
    }
  }

  RLConfig config;
  PolicySpec spec;
  try {
    for (const auto& [key, value] : doc["config"].items()) {
      if (key == "policy") continue;
      config.set(key, value.get<std::string>());
    }
    spec = spec_from_json(doc["config"].at("policy"));
    spec.validate();
  } catch (const json::exception& e) {
    fail(text, "config", std::string("bad config: ") + e.what());
  } catch (const Error& e) {
    fail(text, "config", std::string("bad config: ") + e.what());
  }

  std::vector<Parameter> params;
  for (const auto& [name, entry] : doc["params"].items()) {
    try {
      const auto& shape = entry.at("shape");
      const auto& data = entry.at("data");
      if (!shape.is_array() || shape.size() != 2) {
        fail(text, name, "parameter '" + name + "' has a malformed shape");
      }
      const auto rows = shape[0].get<Eigen::Index>();
      const auto cols = shape[1].get<Eigen::Index>();
      if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        fail(text, name,
             "parameter '" + name + "' data length does not match its shape");
      }
      Mat m(rows, cols);
      for (Eigen::Index i = 0; i < rows * cols; ++i) {
        const auto& x = data[static_cast<std::size_t>(i)];
        if (!x.is_number()) {
          fail(text, name, "parameter '" + name + "' holds a non-number");
        }
        m.data()[i] = x.get<double>();
      }
      params.push_back({name, std::move(m), true});
    } catch (const json::exception& e) {
      fail(text, name, "parameter '" + name + "': " + e.what());
    }
  }

  try {
    Policy policy = Policy::from_parameters(spec, std::move(params));
    const auto step = doc["step"].get<std::uint64_t>();
    Rng rng = Rng::from_state_hex(doc["rng"].get<std::string>());
    return Checkpoint{config, std::move(policy), step, rng};
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path) {
  const std::string text = checkpoint_to_json(checkpoint);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp);
    out << text;
    if (!out) throw IoError("short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace asrrl::agent
