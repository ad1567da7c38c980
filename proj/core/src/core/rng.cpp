#include "asrrl/core/rng.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>

#include "asrrl/core/error.hpp"

namespace asrrl {

namespace {

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// FNV-1a
std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

Rng Rng::substream(std::uint64_t root_seed, std::string_view name) {
  std::uint64_t mix = root_seed ^ rotl(hash_name(name), 17);
  return Rng(splitmix64(mix));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw Error("uniform_index: empty range");
  // rejection sampling removes modulo bias
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 in (0, 1] keeps the log finite
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::string Rng::state_hex() const {
  std::string out;
  char buf[17];
  for (auto word : s_) {
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(word));
    out += buf;
  }
  // the cached Box-Muller value is part of the state
  std::uint64_t spare_bits = 0;
  static_assert(sizeof(spare_bits) == sizeof(spare_));
  std::memcpy(&spare_bits, &spare_, sizeof(spare_));
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(spare_bits));
  out += has_spare_ ? "1" : "0";
  out += buf;
  return out;
}

Rng Rng::from_state_hex(std::string_view hex) {
  if (hex.size() != 4 * 16 + 1 + 16) {
    throw IoError("rng state has length " + std::to_string(hex.size()) +
                  ", expected 81");
  }
  auto word = [&](std::size_t offset) {
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      const char c = hex[offset + i];
      int digit;
      if (c >= '0' && c <= '9') {
        digit = c - '0';
      } else if (c >= 'a' && c <= 'f') {
        digit = c - 'a' + 10;
      } else {
        throw IoError("rng state contains non-hex character");
      }
      value = (value << 4) | static_cast<std::uint64_t>(digit);
    }
    return value;
  };
  Rng rng;
  for (std::size_t i = 0; i < 4; ++i) rng.s_[i] = word(16 * i);
  if (hex[64] != '0' && hex[64] != '1') throw IoError("rng state: bad flag");
  rng.has_spare_ = hex[64] == '1';
  const std::uint64_t spare_bits = word(65);
  std::memcpy(&rng.spare_, &spare_bits, sizeof(spare_bits));
  return rng;
}

}  // namespace asrrl
