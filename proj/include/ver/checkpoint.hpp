#pragma once

#include <string>

#include "ver/env.hpp"
#include "ver/policy.hpp"

namespace ver::harness {

enum class CheckpointFormat { json, binary };

CheckpointFormat checkpoint_format_from_string(const std::string& s);

struct Checkpoint {
  env::EnvConfig env_cfg;
  policy::PolicyParams params;
  uint32_t trace_len = 12;
};

// Versioned on-disk policy snapshot. Both formats embed the environment
// config and its hash; loading rejects a file whose hash does not match the
// embedded config (corruption or version skew).
void save_checkpoint(const std::string& path, const Checkpoint& ckpt, CheckpointFormat format);

// Format is auto-detected from the leading bytes.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ver::harness
