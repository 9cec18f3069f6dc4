#pragma once

#include <string>

#include "ver/analysis.hpp"
#include "ver/env.hpp"
#include "ver/grpo.hpp"
#include "ver/judge_client.hpp"
#include "ver/policy.hpp"
#include "ver/rewards.hpp"

namespace ver::harness {

enum class PolicyInitKind { zero, noise, calibrated };

PolicyInitKind policy_init_from_string(const std::string& s);

struct PolicyInitConfig {
  PolicyInitKind kind = PolicyInitKind::calibrated;
  double noise_scale = 0.01;  // used by kind = noise
  double w_lang = 1.0;
  double w_vis = 0.3;
  double dilution_kappa = 0.25;
  uint32_t trace_len = 12;
};

struct EvalSection {
  uint32_t n_episodes = 1000;
  uint32_t votes = 1;
  double temperature = 0.01;
  uint64_t seed = 0;
};

struct RunConfig {
  std::string label = "run";
  uint64_t seed = 0;
  std::string out_dir = "runs";
  env::EnvConfig env;
  PolicyInitConfig policy;
  rewards::RewardConfig rewards;
  grpo::TrainConfig train;
  EvalSection eval;
  judge::JudgeClientConfig judge_client;
};

// Parses the key-value tree (TOML subset: [section], scalars, arrays,
// comments) and validates every nested invariant. Unknown sections and keys
// are rejected by name; absent keys take the documented defaults. The
// top-level seed seeds env/train/eval unless those sections override it.
// VER_JUDGE_ENDPOINT in the environment overrides judge_client.endpoint.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// A fully-defaulted config for the given seed (what a "seed only" file
// yields).
RunConfig default_config(uint64_t seed);

void validate(const RunConfig& cfg);

policy::PolicyParams build_initial_params(const RunConfig& cfg);

}  // namespace ver::harness
