#ifndef ASRRL_SCORING_EXTERNAL_HPP_
#define ASRRL_SCORING_EXTERNAL_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>

#include "asrrl/scoring/line_stream.hpp"
#include "asrrl/scoring/scorer.hpp"

namespace asrrl::scoring {

// Wire messages, one JSON object per line:
//   request  {"id": u64, "kind": "sim"|"mos"|"intell", "speech": [f64...],
//             "target": [f64...]|null, "text_id": u64|null}
//   response {"id": u64, "score": f64} or {"id": u64, "error": "message"}
struct ScoreRequest {
  std::uint64_t id = 0;
  ScoreKind kind = ScoreKind::sim;
  Vector speech;
  std::optional<Vector> target;
  std::optional<std::uint64_t> text_id;
};

struct ScoreResponse {
  std::uint64_t id = 0;
  std::optional<double> score;
  std::optional<std::string> error;
};

std::string encode_request(const ScoreRequest& request);
std::string encode_response(const ScoreResponse& response);
// Throw ScorerFault describing the protocol violation.
ScoreRequest decode_request(std::string_view line);
ScoreResponse decode_response(std::string_view line);

// Client side of the protocol. Requests are serialized on the connection;
// a background thread matches responses to requests by id, in any order.
// A malformed line or a response for an unknown id breaks the connection:
// every pending and future request fails with ScorerFault.
class ScorerClient {
 public:
  explicit ScorerClient(std::unique_ptr<LineStream> stream,
                        std::chrono::milliseconds timeout =
                            std::chrono::milliseconds(10000));
  ~ScorerClient();
  ScorerClient(const ScorerClient&) = delete;
  ScorerClient& operator=(const ScorerClient&) = delete;

  std::future<double> submit(ScoreKind kind, const SpeechFeatures& speech,
                             const std::optional<Voiceprint>& target,
                             std::optional<std::uint64_t> text_id);

  // submit and wait, raising ScorerFault on timeout
  double score(ScoreKind kind, const SpeechFeatures& speech,
               const std::optional<Voiceprint>& target,
               std::optional<std::uint64_t> text_id);

  std::chrono::milliseconds timeout() const { return timeout_; }
  bool broken() const;

 private:
  std::pair<std::uint64_t, std::future<double>> submit_request(
      ScoreKind kind, const SpeechFeatures& speech,
      const std::optional<Voiceprint>& target,
      std::optional<std::uint64_t> text_id);
  void reader_loop();
  void break_connection(const std::string& reason);

  std::unique_ptr<LineStream> stream_;
  std::chrono::milliseconds timeout_;
  std::mutex write_mu_;
  mutable std::mutex pending_mu_;
  std::map<std::uint64_t, std::promise<double>> pending_;
  std::set<std::uint64_t> abandoned_;
  std::optional<std::string> fault_;
  std::atomic<std::uint64_t> next_id_{1};
  std::atomic<bool> closing_{false};
  std::chrono::steady_clock::time_point close_deadline_;
  std::thread reader_;
};

// Scorer plug-in backed by an external process or socket.
class ExternalScorer : public Scorer {
 public:
  ExternalScorer(std::shared_ptr<ScorerClient> client, ScoreKind kind)
      : client_(std::move(client)), kind_(kind) {}

  ScoreKind kind() const override { return kind_; }
  double score(const SpeechFeatures& speech,
               const ScoreContext& context) const override;

 private:
  std::shared_ptr<ScorerClient> client_;
  ScoreKind kind_;
};

// Server side: answers requests with `handler`. Responses are buffered up to
// `window` at a time and released in a seeded random order once the window
// fills or no further input is waiting. Requests that cannot be parsed are
// answered with an error response (id 0 when the id itself is unreadable).
struct ServeOptions {
  std::size_t window = 1;
  std::uint64_t seed = 0;
  // emit a garbage line instead of the n-th response (0 = never)
  std::uint64_t malformed_at = 0;
};

using ScoreHandler = std::function<double(const ScoreRequest&)>;

// returns the number of requests answered
std::uint64_t serve_scorer(LineStream& stream, const ScoreHandler& handler,
                           const ServeOptions& options = {});

// Handler that echoes speech[0] back as the score.
double echo_handler(const ScoreRequest& request);

}  // namespace asrrl::scoring

#endif  // ASRRL_SCORING_EXTERNAL_HPP_
