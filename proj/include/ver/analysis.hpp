#pragma once

#include <cstdint>
#include <vector>

#include "ver/env.hpp"
#include "ver/grpo.hpp"
#include "ver/policy.hpp"

namespace ver::analysis {

struct DriftConfig {
  double step_error = 0.01;          // per-step error probability
  std::vector<uint32_t> chain_lengths = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  uint32_t trials = 10000;
  uint64_t seed = 0;
};

void validate(const DriftConfig& cfg);

struct DriftPoint {
  uint32_t chain_length = 0;
  double success_rate = 0.0;  // fraction of trials where every step succeeded
  double stderr_est = 0.0;    // sqrt(p(1-p)/trials) at the empirical rate
};

// Empirical chain-success rates: a chain of length T succeeds iff all T
// independent Bernoulli(1 - step_error) steps succeed. Deterministic in seed,
// and each (T, trial) pair has its own counter-derived stream.
std::vector<DriftPoint> simulate_drift(const DriftConfig& cfg);

// Zero-intercept least-squares slope of failure rate vs chain length. The
// zero intercept is forced because a length-0 chain cannot fail.
double fitted_failure_slope(const std::vector<DriftPoint>& points);

std::vector<double> dilution_curve(double kappa, uint32_t t_max);

enum class TieRule { lowest_index, first_seen };

// Modal answer; ties break per rule (default: lowest option index).
uint32_t majority_vote(const std::vector<uint32_t>& answers, TieRule rule = TieRule::lowest_index);

struct EvalMetrics {
  double accuracy = 0.0;
  double grounding_rate = 0.0;  // over correct responses, judged against QD evidence
  double mean_trace_len = 0.0;
  uint32_t votes = 1;
};

struct EvalConfig {
  uint32_t n_episodes = 1000;
  policy::Mode mode = policy::Mode::cot;
  uint32_t votes = 1;
  double temperature = 0.01;
  uint32_t trace_len = 12;
  uint64_t seed = 0;
  TieRule tie_rule = TieRule::lowest_index;
  uint32_t parallelism = 1;
};

// Per episode, samples `votes` responses and majority-votes the answer
// (votes = 1 is single-sample decoding). Grounding is counted per response.
EvalMetrics eval_policy(const policy::PolicyParams& params, const env::EnvConfig& env_cfg,
                        const EvalConfig& cfg);

struct ResponseRecord {
  uint64_t episode_index = 0;
  bool correct = false;
  int verdict = 0;
};

// Fraction of correct-answer responses whose trace passes the judge; 0 when
// nothing is correct. One CoT response per episode at temperature 1.
double grounding_rate(const policy::PolicyParams& params, const env::EnvConfig& env_cfg,
                      const grpo::JudgeFn& judge_fn, uint32_t n_episodes,
                      env::EvidenceMode evidence_mode, uint32_t trace_len, uint64_t seed,
                      std::vector<ResponseRecord>* log = nullptr);

}  // namespace ver::analysis
