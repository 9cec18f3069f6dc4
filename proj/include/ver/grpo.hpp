#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ver/env.hpp"
#include "ver/judge.hpp"
#include "ver/policy.hpp"
#include "ver/rewards.hpp"

namespace ver::grpo {

enum class JudgeKind { rule, remote };

const char* to_string(JudgeKind k);
JudgeKind judge_kind_from_string(const std::string& s);

struct TrainConfig {
  uint32_t group_size = 8;
  double clip_epsilon = 0.2;
  double kl_beta = 0.04;
  double learning_rate = 0.05;
  uint32_t iterations = 2000;
  uint32_t episodes_per_iter = 4;
  double std_floor = 1e-8;
  uint64_t seed = 0;
  env::EvidenceMode evidence_mode = env::EvidenceMode::QD;
  JudgeKind judge = JudgeKind::rule;
  uint32_t trace_len = 12;
  uint32_t parallelism = 1;
};

void validate(const TrainConfig& cfg);

struct GroupBatch {
  env::Episode episode;
  std::vector<policy::Response> responses;
  std::vector<double> rewards;       // composed evid_totals
  std::vector<double> advantages;    // group-normalized
  std::vector<double> old_logprobs;  // under the sampling policy
  std::vector<int> verdicts;         // judge scores, kept so the judge runs once
};

struct IterRecord {
  uint32_t iter = 0;
  double mean_reward = 0.0;
  double mean_abs_advantage = 0.0;
  double clip_fraction = 0.0;
  double kl_to_ref = 0.0;
  double accuracy = 0.0;
  double grounding_rate = 0.0;
};

struct TrainReport {
  std::vector<IterRecord> iterations;
};

struct TrainResult {
  TrainReport report;
  policy::PolicyParams params;
  policy::PolicyParams reference;
};

using JudgeFn = std::function<judge::Verdict(const policy::Response&, const env::EvidenceList&,
                                             const env::Episode&)>;

JudgeFn rule_judge_fn();

// G independent samples from params_old on disjoint substreams of
// base_stream; member i's stream depends only on (base_stream, i), so worker
// assignment cannot change the result.
std::vector<policy::Response> rollout_group(const policy::PolicyParams& params_old,
                                            const env::Episode& ep, uint32_t group_size,
                                            policy::Mode mode, uint32_t trace_len,
                                            uint64_t base_stream, uint32_t parallelism = 1);

// Group-relative normalization with population statistics. Groups whose
// reward spread is below std_floor produce all-zero advantages.
std::vector<double> normalize_advantages(const std::vector<double>& rewards, double std_floor);

// Exact KL between the full token distributions of params and ref at each
// visited state (the tabular policy makes this exact, no sampling).
double kl_divergence(const policy::PolicyParams& params, const policy::PolicyParams& ref,
                     const env::Episode& ep, const policy::VisitedStates& visited);

// Clipped surrogate with sequence-level importance ratios and a KL penalty to
// the reference policy, averaged over the group.
double clipped_objective(const policy::PolicyParams& params, const GroupBatch& batch,
                         const policy::PolicyParams& ref, double clip_epsilon, double kl_beta);

// Exact gradient of clipped_objective. At the clip boundary ties resolve to
// the unclipped branch; an active clipped branch is constant in params and
// contributes nothing.
policy::Gradient objective_grad(const policy::PolicyParams& params, const GroupBatch& batch,
                                const policy::PolicyParams& ref, double clip_epsilon,
                                double kl_beta);

// Scores a group: rewards, verdicts, advantages. Exposed for tests that need
// the exact training-time reward path.
GroupBatch score_group(const env::Episode& ep, std::vector<policy::Response> responses,
                       std::vector<double> old_logprobs, const rewards::RewardConfig& rcfg,
                       env::EvidenceMode evidence_mode, const JudgeFn& judge_fn,
                       double std_floor);

TrainResult train(const TrainConfig& cfg, const env::EnvConfig& env_cfg,
                  const rewards::RewardConfig& reward_cfg,
                  const policy::PolicyParams& initial_params, const JudgeFn& judge_fn);

}  // namespace ver::grpo
