#ifndef ASRRL_SCORING_LINE_STREAM_HPP_
#define ASRRL_SCORING_LINE_STREAM_HPP_

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace asrrl::scoring {

// Bidirectional newline-delimited byte stream. One reader thread and one
// writer thread may use a stream concurrently.
class LineStream {
 public:
  virtual ~LineStream() = default;
  // appends '\n'
  virtual void write_line(std::string_view line) = 0;
  // nullopt on end of stream
  virtual std::optional<std::string> read_line() = 0;
  // true once read_line would return without blocking, waiting at most
  // `timeout` for that to happen
  virtual bool wait_input(std::chrono::milliseconds timeout) = 0;
  bool input_ready() { return wait_input(std::chrono::milliseconds(0)); }
  // half-close: signals end of requests to the peer
  virtual void close_write() = 0;
};

// Line stream over a pair of POSIX file descriptors.
class FdLineStream : public LineStream {
 public:
  FdLineStream(int read_fd, int write_fd, bool owns_fds);
  ~FdLineStream() override;
  FdLineStream(const FdLineStream&) = delete;
  FdLineStream& operator=(const FdLineStream&) = delete;

  void write_line(std::string_view line) override;
  std::optional<std::string> read_line() override;
  bool wait_input(std::chrono::milliseconds timeout) override;
  void close_write() override;

 private:
  int read_fd_;
  int write_fd_;
  bool owns_fds_;
  bool same_fd_;
  std::string buffer_;
  bool eof_ = false;
};

// Spawns `argv` with its stdin/stdout connected to the returned stream. The
// child is reaped (and killed if still running) when the stream is destroyed.
std::unique_ptr<LineStream> spawn_process(const std::vector<std::string>& argv);

// Connects to host:port over TCP.
std::unique_ptr<LineStream> connect_tcp(const std::string& host,
                                        std::uint16_t port);

// Listening socket helper for scorer servers.
class TcpListener {
 public:
  // port 0 picks an ephemeral port
  explicit TcpListener(std::uint16_t port, const std::string& host = "127.0.0.1");
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<LineStream> accept();

 private:
  int fd_;
  std::uint16_t port_;
};

}  // namespace asrrl::scoring

#endif  // ASRRL_SCORING_LINE_STREAM_HPP_
