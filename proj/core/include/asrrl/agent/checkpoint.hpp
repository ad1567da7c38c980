#ifndef ASRRL_AGENT_CHECKPOINT_HPP_
#define ASRRL_AGENT_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "asrrl/agent/policy.hpp"
#include "asrrl/core/config.hpp"
#include "asrrl/core/rng.hpp"

namespace asrrl::agent {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  RLConfig config;
  Policy policy;
  std::uint64_t step = 0;
  Rng rng;
};

// The policy spec (scenario, layout, action size) travels inside the
// "config" object under "policy" so a checkpoint is self-contained.
std::string checkpoint_to_json(const Checkpoint& checkpoint);
// Throws CheckpointError with the byte offset of the first problem when it
// can be located.
Checkpoint checkpoint_from_json(std::string_view text);

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace asrrl::agent

#endif  // ASRRL_AGENT_CHECKPOINT_HPP_
