#pragma once

#include <cstdint>

#include "ver/env.hpp"
#include "ver/policy.hpp"

namespace ver::rewards {

struct RewardConfig {
  double alpha = 0.3;   // evidence bonus weight
  double w_fmt = 0.1;   // format weight
  double w_len = 0.1;   // length weight
  uint32_t length_min = 8;
  uint32_t length_max = 16;
  // Reference band for token-scale runs; kept as a preset, not the default.
  static constexpr uint32_t kPaperLengthMin = 320;
  static constexpr uint32_t kPaperLengthMax = 512;
};

void validate(const RewardConfig& cfg);

struct RewardBreakdown {
  double accuracy = 0.0;        // 0 or 1
  double format = 0.0;          // 0 or w_fmt
  double length = 0.0;          // 0 or w_len
  double evidence_bonus = 0.0;  // 0 or alpha
  double base_total = 0.0;
  double evid_total = 0.0;
};

double accuracy_reward(const env::Episode& ep, const policy::Response& resp);

// w_fmt iff every trace token is in-vocabulary, the trace fits the length
// cap, and the answer is a single valid option index.
double format_reward(const policy::Response& resp, const env::Episode& ep,
                     const RewardConfig& cfg);

double length_reward(const policy::Response& resp, const RewardConfig& cfg);

// Bonus applies only when the answer is correct AND the judge verdict is 1;
// otherwise the total is just the base reward.
RewardBreakdown compose(double accuracy, double format, double length, int verdict,
                        const RewardConfig& cfg);

}  // namespace ver::rewards
