#include "asrrl/scoring/line_stream.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "asrrl/core/error.hpp"

namespace asrrl::scoring {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw ScorerFault(what + ": " + std::strerror(errno));
}

class ChildProcessStream : public LineStream {
 public:
  ChildProcessStream(pid_t pid, int read_fd, int write_fd)
      : pid_(pid), stream_(read_fd, write_fd, true) {}
  ~ChildProcessStream() override {
    stream_.close_write();
    int status = 0;
    // give the child a moment to exit on EOF before killing it
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) return;
      usleep(2000);
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
  }

  void write_line(std::string_view line) override { stream_.write_line(line); }
  std::optional<std::string> read_line() override { return stream_.read_line(); }
  bool wait_input(std::chrono::milliseconds timeout) override {
    return stream_.wait_input(timeout);
  }
  void close_write() override { stream_.close_write(); }

 private:
  pid_t pid_;
  FdLineStream stream_;
};

}  // namespace

FdLineStream::FdLineStream(int read_fd, int write_fd, bool owns_fds)
    : read_fd_(read_fd),
      write_fd_(write_fd),
      owns_fds_(owns_fds),
      same_fd_(read_fd == write_fd) {}

FdLineStream::~FdLineStream() {
  if (!owns_fds_) return;
  if (write_fd_ >= 0 && !same_fd_) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
}

void FdLineStream::write_line(std::string_view line) {
  if (write_fd_ < 0) throw ScorerFault("write on a closed stream");
  std::string data(line);
  data.push_back('\n');
  std::size_t sent = 0;
  while (sent < data.size()) {
    ssize_t n;
    if (same_fd_) {
      n = ::send(write_fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    } else {
      n = ::write(write_fd_, data.data() + sent, data.size() - sent);
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("stream write failed");
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdLineStream::read_line() {
  while (true) {
    const auto pos = buffer_.find('\n');
    if (pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (eof_) {
      if (buffer_.empty()) return std::nullopt;
      std::string rest = std::move(buffer_);
      buffer_.clear();
      return rest;
    }
    char chunk[4096];
    const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("stream read failed");
    }
    if (n == 0) {
      eof_ = true;
    } else {
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }
}

bool FdLineStream::wait_input(std::chrono::milliseconds timeout) {
  if (buffer_.find('\n') != std::string::npos || eof_) return true;
  pollfd pfd{read_fd_, POLLIN, 0};
  return ::poll(&pfd, 1, static_cast<int>(timeout.count())) > 0;
}

void FdLineStream::close_write() {
  if (write_fd_ < 0) return;
  if (same_fd_) {
    ::shutdown(write_fd_, SHUT_WR);
  } else if (owns_fds_) {
    ::close(write_fd_);
  }
  write_fd_ = -1;
}

std::unique_ptr<LineStream> spawn_process(const std::vector<std::string>& argv) {
  if (argv.empty()) throw ConfigError("spawn_process: empty command");
  // a dead scorer must surface as a write error, not kill this process
  ::signal(SIGPIPE, SIG_IGN);
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) fail("pipe");
  if (::pipe(from_child) != 0) fail("pipe");
  const pid_t pid = ::fork();
  if (pid < 0) fail("fork");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    _exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<ChildProcessStream>(pid, from_child[0], to_child[1]);
}

std::unique_ptr<LineStream> connect_tcp(const std::string& host,
                                        std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &result) != 0) {
    throw ScorerFault("cannot resolve " + host);
  }
  int fd = -1;
  for (addrinfo* ai = result; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(result);
  if (fd < 0) fail("connect to " + host + ":" + service);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return std::make_unique<FdLineStream>(fd, fd, true);
}

TcpListener::TcpListener(std::uint16_t port, const std::string& host) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) fail("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw ConfigError("invalid listen address " + host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(fd_, 8) != 0) {
    const int saved = errno;
    ::close(fd_);
    errno = saved;
    fail("bind/listen on port " + std::to_string(port));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { ::close(fd_); }

std::unique_ptr<LineStream> TcpListener::accept() {
  const int client = ::accept(fd_, nullptr, nullptr);
  if (client < 0) fail("accept");
  int one = 1;
  ::setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return std::make_unique<FdLineStream>(client, client, true);
}

}  // namespace asrrl::scoring
