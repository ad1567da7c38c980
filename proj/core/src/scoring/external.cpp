#include "asrrl/scoring/external.hpp"

#include <algorithm>
#include "json.hpp"
#include <vector>

#include "asrrl/core/error.hpp"
#include "asrrl/core/rng.hpp"

namespace asrrl::scoring {

using nlohmann::json;

namespace {

json parse_object(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ScorerFault(std::string("malformed scorer line: ") + e.what());
  }
  if (!j.is_object()) throw ScorerFault("scorer line is not a JSON object");
  return j;
}

std::uint64_t read_id(const json& j) {
  auto it = j.find("id");
  if (it == j.end() || !it->is_number_unsigned()) {
    throw ScorerFault("scorer message has no unsigned integer id");
  }
  return it->get<std::uint64_t>();
}

Vector read_reals(const json& j, const char* field) {
  if (!j.is_array()) {
    throw ScorerFault(std::string("field '") + field + "' is not an array");
  }
  Vector out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) {
      throw ScorerFault(std::string("field '") + field +
                        "' contains a non-number");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

std::string encode_request(const ScoreRequest& request) {
  json j;
  j["id"] = request.id;
  j["kind"] = std::string(to_string(request.kind));
  j["speech"] = request.speech;
  j["target"] = request.target ? json(*request.target) : json(nullptr);
  j["text_id"] = request.text_id ? json(*request.text_id) : json(nullptr);
  return j.dump();
}

std::string encode_response(const ScoreResponse& response) {
  json j;
  j["id"] = response.id;
  if (response.error) {
    j["error"] = *response.error;
  } else {
    j["score"] = response.score.value_or(0.0);
  }
  return j.dump();
}

ScoreRequest decode_request(std::string_view line) {
  const json j = parse_object(line);
  ScoreRequest request;
  request.id = read_id(j);
  auto kind = j.find("kind");
  if (kind == j.end() || !kind->is_string()) {
    throw ScorerFault("request has no kind");
  }
  try {
    request.kind = parse_score_kind(kind->get<std::string>());
  } catch (const ConfigError& e) {
    throw ScorerFault(e.what());
  }
  auto speech = j.find("speech");
  if (speech == j.end()) throw ScorerFault("request has no speech");
  request.speech = read_reals(*speech, "speech");
  if (auto t = j.find("target"); t != j.end() && !t->is_null()) {
    request.target = read_reals(*t, "target");
  }
  if (auto t = j.find("text_id"); t != j.end() && !t->is_null()) {
    if (!t->is_number_unsigned()) throw ScorerFault("text_id is not a u64");
    request.text_id = t->get<std::uint64_t>();
  }
  return request;
}

ScoreResponse decode_response(std::string_view line) {
  const json j = parse_object(line);
  ScoreResponse response;
  response.id = read_id(j);
  auto score = j.find("score");
  auto error = j.find("error");
  if ((score != j.end()) == (error != j.end())) {
    throw ScorerFault("response must carry exactly one of score or error");
  }
  if (score != j.end()) {
    if (!score->is_number()) throw ScorerFault("score is not a number");
    response.score = score->get<double>();
  } else {
    if (!error->is_string()) throw ScorerFault("error is not a string");
    response.error = error->get<std::string>();
  }
  return response;
}

ScorerClient::ScorerClient(std::unique_ptr<LineStream> stream,
                           std::chrono::milliseconds timeout)
    : stream_(std::move(stream)), timeout_(timeout) {
  reader_ = std::thread([this] { reader_loop(); });
}

ScorerClient::~ScorerClient() {
  // give the peer one timeout to answer what is in flight and hang up
  close_deadline_ = std::chrono::steady_clock::now() + timeout_;
  closing_ = true;
  {
    std::lock_guard lock(write_mu_);
    try {
      stream_->close_write();
    } catch (const std::exception&) {
    }
  }
  if (reader_.joinable()) reader_.join();
}

bool ScorerClient::broken() const {
  std::lock_guard lock(pending_mu_);
  return fault_.has_value();
}

void ScorerClient::break_connection(const std::string& reason) {
  std::lock_guard lock(pending_mu_);
  if (!fault_) fault_ = reason;
  for (auto& [id, promise] : pending_) {
    promise.set_exception(std::make_exception_ptr(ScorerFault(reason)));
  }
  pending_.clear();
}

void ScorerClient::reader_loop() {
  try {
    for (;;) {
      if (!stream_->wait_input(std::chrono::milliseconds(50))) {
        if (closing_ && std::chrono::steady_clock::now() >= close_deadline_) {
          break_connection("client closed while requests were pending");
          return;
        }
        continue;
      }
      auto line = stream_->read_line();
      if (!line) break;
      ScoreResponse response;
      try {
        response = decode_response(*line);
      } catch (const ScorerFault& e) {
        break_connection(e.what());
        return;
      }
      std::lock_guard lock(pending_mu_);
      auto it = pending_.find(response.id);
      if (it == pending_.end()) {
        if (abandoned_.erase(response.id)) continue;
        const std::string reason =
            "response for unknown id " + std::to_string(response.id);
        if (!fault_) fault_ = reason;
        for (auto& [id, promise] : pending_) {
          promise.set_exception(std::make_exception_ptr(ScorerFault(reason)));
        }
        pending_.clear();
        return;
      }
      if (response.error) {
        it->second.set_exception(std::make_exception_ptr(
            ScorerFault("scorer error for request " +
                        std::to_string(response.id) + ": " + *response.error)));
      } else {
        it->second.set_value(*response.score);
      }
      pending_.erase(it);
    }
    break_connection("scorer closed the connection");
  } catch (const std::exception& e) {
    break_connection(e.what());
  }
}

std::future<double> ScorerClient::submit(
    ScoreKind kind, const SpeechFeatures& speech,
    const std::optional<Voiceprint>& target,
    std::optional<std::uint64_t> text_id) {
  return submit_request(kind, speech, target, text_id).second;
}

std::pair<std::uint64_t, std::future<double>> ScorerClient::submit_request(
    ScoreKind kind, const SpeechFeatures& speech,
    const std::optional<Voiceprint>& target,
    std::optional<std::uint64_t> text_id) {
  ScoreRequest request;
  request.id = next_id_.fetch_add(1);
  request.kind = kind;
  request.speech = speech.values();
  if (target) request.target = target->values();
  request.text_id = text_id;

  std::future<double> result;
  {
    std::lock_guard lock(pending_mu_);
    if (fault_) throw ScorerFault("scorer connection is broken: " + *fault_);
    result = pending_[request.id].get_future();
  }
  const std::string line = encode_request(request);
  try {
    std::lock_guard lock(write_mu_);
    stream_->write_line(line);
  } catch (const ScorerFault& e) {
    break_connection(e.what());
  }
  return {request.id, std::move(result)};
}

double ScorerClient::score(ScoreKind kind, const SpeechFeatures& speech,
                           const std::optional<Voiceprint>& target,
                           std::optional<std::uint64_t> text_id) {
  auto [id, future] = submit_request(kind, speech, target, text_id);
  if (future.wait_for(timeout_) != std::future_status::ready) {
    std::lock_guard lock(pending_mu_);
    // a late answer for this id is dropped instead of breaking the stream
    if (pending_.erase(id)) abandoned_.insert(id);
    throw ScorerFault("scorer timed out after " +
                      std::to_string(timeout_.count()) + " ms");
  }
  return future.get();
}

double ExternalScorer::score(const SpeechFeatures& speech,
                             const ScoreContext& context) const {
  return client_->score(kind_, speech, context.target, context.text_id);
}

std::uint64_t serve_scorer(LineStream& stream, const ScoreHandler& handler,
                           const ServeOptions& options) {
  Rng rng(options.seed);
  std::vector<std::string> outbox;
  std::uint64_t answered = 0;
  std::uint64_t emitted = 0;

  auto flush = [&] {
    // Fisher-Yates with the portable generator
    for (std::size_t i = outbox.size(); i > 1; --i) {
      std::swap(outbox[i - 1], outbox[rng.uniform_index(i)]);
    }
    for (const auto& line : outbox) {
      ++emitted;
      if (options.malformed_at != 0 && emitted == options.malformed_at) {
        stream.write_line("{this is not json");
      } else {
        stream.write_line(line);
      }
    }
    outbox.clear();
  };

  while (auto line = stream.read_line()) {
    if (line->empty()) continue;
    ScoreResponse response;
    try {
      const ScoreRequest request = decode_request(*line);
      response.id = request.id;
      try {
        response.score = handler(request);
      } catch (const std::exception& e) {
        response.error = e.what();
      }
    } catch (const ScorerFault& e) {
      response.error = e.what();
    }
    outbox.push_back(encode_response(response));
    ++answered;
    if (outbox.size() >= std::max<std::size_t>(options.window, 1) ||
        !stream.input_ready()) {
      flush();
    }
  }
  flush();
  return answered;
}

double echo_handler(const ScoreRequest& request) {
  if (request.speech.empty()) throw ScorerFault("empty speech");
  return request.speech.front();
}

}  // namespace asrrl::scoring
