#ifndef ASRRL_CORE_ERROR_HPP_
#define ASRRL_CORE_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace asrrl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// shape or length disagreement between a value and its declared layout
class DimensionError : public Error {
 public:
  using Error::Error;
};

// malformed action (out of bounds, non-finite, wrong variant)
class ActionError : public Error {
 public:
  using Error::Error;
};

// episode protocol violation: stepping a finished episode, scenario mismatch
class EpisodeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// a scorer produced a value outside its declared range
class ScoreRangeError : public Error {
 public:
  using Error::Error;
};

// an external scorer timed out, disconnected or broke the wire protocol
class ScorerFault : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

// corrupt or incompatible checkpoint; offset is the byte position of the
// first inconsistency when known
class CheckpointError : public IoError {
 public:
  CheckpointError(const std::string& what, std::size_t offset)
      : IoError(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  explicit CheckpointError(const std::string& what)
      : IoError(what), offset_(npos) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace asrrl

#endif  // ASRRL_CORE_ERROR_HPP_
