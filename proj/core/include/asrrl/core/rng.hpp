#ifndef ASRRL_CORE_RNG_HPP_
#define ASRRL_CORE_RNG_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace asrrl {

// xoshiro256** with portable uniform/normal draws. The standard library's
// distributions are implementation-defined, which would break cross-platform
// reproducibility of corpora and training runs; the generator state is four
// words so checkpoints can store it as a short hex string.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  // Independent stream derived from (seed, name); used to give corpus
  // generation, policy initialization and rollouts their own randomness.
  static Rng substream(std::uint64_t root_seed, std::string_view name);

  std::uint64_t next_u64();
  // uniform in [0, 1)
  double uniform();
  // uniform integer in [0, n)
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::string state_hex() const;
  static Rng from_state_hex(std::string_view hex);

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace asrrl

#endif  // ASRRL_CORE_RNG_HPP_
