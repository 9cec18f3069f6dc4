#include "ver/rewards.hpp"

#include "ver/errors.hpp"

namespace ver::rewards {

void validate(const RewardConfig& cfg) {
  if (cfg.alpha < 0.0) throw ConfigError("alpha must be >= 0");
  if (cfg.w_fmt < 0.0) throw ConfigError("w_fmt must be >= 0");
  if (cfg.w_len < 0.0) throw ConfigError("w_len must be >= 0");
  if (cfg.length_min > cfg.length_max)
    throw ConfigError("length band invalid: length_min " + std::to_string(cfg.length_min) +
                      " > length_max " + std::to_string(cfg.length_max));
}

double accuracy_reward(const env::Episode& ep, const policy::Response& resp) {
  return env::check_answer(ep, resp.answer) ? 1.0 : 0.0;
}

double format_reward(const policy::Response& resp, const env::Episode& ep,
                     const RewardConfig& cfg) {
  if (resp.trace.size() > policy::kMaxTraceLen) return 0.0;
  for (env::TraceToken tok : resp.trace)
    if (tok >= ep.n_trace_tokens()) return 0.0;
  if (resp.answer < 1 || resp.answer > ep.n_options) return 0.0;
  return cfg.w_fmt;
}

double length_reward(const policy::Response& resp, const RewardConfig& cfg) {
  size_t len = resp.trace.size();
  return (len >= cfg.length_min && len <= cfg.length_max) ? cfg.w_len : 0.0;
}

RewardBreakdown compose(double accuracy, double format, double length, int verdict,
                        const RewardConfig& cfg) {
  RewardBreakdown b;
  b.accuracy = accuracy;
  b.format = format;
  b.length = length;
  b.evidence_bonus = (verdict == 1 && accuracy == 1.0) ? cfg.alpha : 0.0;
  b.base_total = accuracy + (format + length);
  b.evid_total = b.base_total + b.evidence_bonus;
  return b;
}

}  // namespace ver::rewards
