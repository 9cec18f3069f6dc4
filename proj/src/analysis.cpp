#include "ver/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ver/errors.hpp"
#include "ver/judge.hpp"
#include "ver/rng.hpp"

namespace ver::analysis {

void validate(const DriftConfig& cfg) {
  if (cfg.step_error < 0.0 || cfg.step_error > 1.0)
    throw ConfigError("step_error must lie in [0,1], got " + std::to_string(cfg.step_error));
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.chain_lengths.empty()) throw ConfigError("chain_lengths must not be empty");
}

std::vector<DriftPoint> simulate_drift(const DriftConfig& cfg) {
  validate(cfg);
  std::vector<DriftPoint> out;
  out.reserve(cfg.chain_lengths.size());
  for (uint32_t T : cfg.chain_lengths) {
    uint32_t successes = 0;
    for (uint32_t trial = 0; trial < cfg.trials; ++trial) {
      rng::Rng r(rng::derive_stream(cfg.seed, T, trial));
      bool ok = true;
      for (uint32_t t = 0; t < T && ok; ++t)
        if (r.next_double() < cfg.step_error) ok = false;
      if (ok) ++successes;
    }
    DriftPoint p;
    p.chain_length = T;
    p.success_rate = static_cast<double>(successes) / cfg.trials;
    p.stderr_est = std::sqrt(p.success_rate * (1.0 - p.success_rate) / cfg.trials);
    out.push_back(p);
  }
  return out;
}

double fitted_failure_slope(const std::vector<DriftPoint>& points) {
  if (points.empty()) throw InputError("cannot fit a slope to zero points");
  double num = 0.0, den = 0.0;
  for (const DriftPoint& p : points) {
    double T = p.chain_length;
    num += T * (1.0 - p.success_rate);
    den += T * T;
  }
  return num / den;
}

std::vector<double> dilution_curve(double kappa, uint32_t t_max) {
  if (kappa < 0.0) throw ConfigError("kappa must be >= 0");
  std::vector<double> out;
  out.reserve(t_max);
  for (uint32_t t = 1; t <= t_max; ++t) out.push_back(policy::dilution_lambda(kappa, t));
  return out;
}

uint32_t majority_vote(const std::vector<uint32_t>& answers, TieRule rule) {
  if (answers.empty()) throw InputError("majority_vote requires a nonempty answer list");
  std::map<uint32_t, uint32_t> counts;
  std::vector<uint32_t> first_seen_order;
  for (uint32_t a : answers) {
    if (counts.find(a) == counts.end()) first_seen_order.push_back(a);
    counts[a] += 1;
  }
  uint32_t best = answers[0];
  uint32_t best_count = 0;
  if (rule == TieRule::lowest_index) {
    for (const auto& [a, c] : counts) {  // map iterates in ascending key order
      if (c > best_count) {
        best = a;
        best_count = c;
      }
    }
  } else {
    for (uint32_t a : first_seen_order) {
      if (counts[a] > best_count) {
        best = a;
        best_count = counts[a];
      }
    }
  }
  return best;
}

EvalMetrics eval_policy(const policy::PolicyParams& params, const env::EnvConfig& env_cfg,
                        const EvalConfig& cfg) {
  if (cfg.votes < 1) throw ConfigError("votes must be >= 1");
  if (cfg.n_episodes < 1) throw ConfigError("n_episodes must be >= 1");

  uint64_t total_trace_len = 0;
  uint32_t n_correct_episodes = 0;
  uint64_t n_responses = 0, n_correct_responses = 0, n_grounded_correct = 0;

  for (uint32_t i = 0; i < cfg.n_episodes; ++i) {
    env::Episode ep = env::gen_episode(env_cfg, i);
    env::EvidenceList qd = env::gen_evidence(ep, env::EvidenceMode::QD);
    std::vector<uint32_t> answers;
    answers.reserve(cfg.votes);
    for (uint32_t v = 0; v < cfg.votes; ++v) {
      rng::Rng r(rng::derive_stream(cfg.seed, 0xe7a1ULL + i, v));
      uint32_t len = cfg.mode == policy::Mode::direct ? 0 : cfg.trace_len;
      policy::Response resp =
          policy::sample_response(params, ep, cfg.mode, len, r, cfg.temperature);
      answers.push_back(resp.answer);
      total_trace_len += resp.trace.size();
      ++n_responses;
      if (env::check_answer(ep, resp.answer)) {
        ++n_correct_responses;
        if (judge::rule_judge(resp, qd, ep).e == 1) ++n_grounded_correct;
      }
    }
    uint32_t voted = majority_vote(answers, cfg.tie_rule);
    if (env::check_answer(ep, voted)) ++n_correct_episodes;
  }

  EvalMetrics m;
  m.accuracy = static_cast<double>(n_correct_episodes) / cfg.n_episodes;
  m.grounding_rate = n_correct_responses == 0
                         ? 0.0
                         : static_cast<double>(n_grounded_correct) / n_correct_responses;
  m.mean_trace_len = static_cast<double>(total_trace_len) / n_responses;
  m.votes = cfg.votes;
  return m;
}

double grounding_rate(const policy::PolicyParams& params, const env::EnvConfig& env_cfg,
                      const grpo::JudgeFn& judge_fn, uint32_t n_episodes,
                      env::EvidenceMode evidence_mode, uint32_t trace_len, uint64_t seed,
                      std::vector<ResponseRecord>* log) {
  if (n_episodes < 1) throw ConfigError("n_episodes must be >= 1");
  uint64_t n_correct = 0, n_grounded = 0;
  for (uint32_t i = 0; i < n_episodes; ++i) {
    env::Episode ep = env::gen_episode(env_cfg, i);
    env::EvidenceList ev = env::gen_evidence(ep, evidence_mode);
    rng::Rng r(rng::derive_stream(seed, 0x97bdULL + i));
    policy::Response resp = policy::sample_response(params, ep, policy::Mode::cot, trace_len, r);
    bool correct = env::check_answer(ep, resp.answer);
    int verdict = judge_fn(resp, ev, ep).e;
    if (correct) {
      ++n_correct;
      if (verdict == 1) ++n_grounded;
    }
    if (log) log->push_back({ep.index, correct, verdict});
  }
  return n_correct == 0 ? 0.0 : static_cast<double>(n_grounded) / n_correct;
}

}  // namespace ver::analysis
