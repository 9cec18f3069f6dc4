#include "ver/grpo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "ver/errors.hpp"
#include "ver/rng.hpp"

namespace ver::grpo {

const char* to_string(JudgeKind k) { return k == JudgeKind::rule ? "rule" : "remote"; }

JudgeKind judge_kind_from_string(const std::string& s) {
  if (s == "rule") return JudgeKind::rule;
  if (s == "remote") return JudgeKind::remote;
  throw ConfigError("unknown judge kind: " + s);
}

void validate(const TrainConfig& cfg) {
  if (cfg.group_size < 2)
    throw ConfigError("group_size must be >= 2, got " + std::to_string(cfg.group_size));
  if (cfg.clip_epsilon <= 0.0 || cfg.clip_epsilon >= 1.0)
    throw ConfigError("clip_epsilon must lie in (0,1), got " + std::to_string(cfg.clip_epsilon));
  if (cfg.kl_beta < 0.0) throw ConfigError("kl_beta must be >= 0");
  if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (cfg.std_floor <= 0.0) throw ConfigError("std_floor must be > 0");
  if (cfg.episodes_per_iter < 1) throw ConfigError("episodes_per_iter must be >= 1");
  if (cfg.trace_len < 1 || cfg.trace_len > policy::kMaxTraceLen)
    throw ConfigError("trace_len must lie in [1," + std::to_string(policy::kMaxTraceLen) +
                      "], got " + std::to_string(cfg.trace_len));
  if (cfg.parallelism < 1) throw ConfigError("parallelism must be >= 1");
}

JudgeFn rule_judge_fn() {
  return [](const policy::Response& resp, const env::EvidenceList& ev, const env::Episode& ep) {
    return judge::rule_judge(resp, ev, ep);
  };
}

std::vector<policy::Response> rollout_group(const policy::PolicyParams& params_old,
                                            const env::Episode& ep, uint32_t group_size,
                                            policy::Mode mode, uint32_t trace_len,
                                            uint64_t base_stream, uint32_t parallelism) {
  if (group_size < 2)
    throw ConfigError("group_size must be >= 2, got " + std::to_string(group_size));
  std::vector<policy::Response> responses(group_size);

  auto sample_member = [&](uint32_t i) {
    rng::Rng member_rng(rng::derive_stream(base_stream, i));
    responses[i] = policy::sample_response(params_old, ep, mode, trace_len, member_rng);
  };

  if (parallelism <= 1) {
    for (uint32_t i = 0; i < group_size; ++i) sample_member(i);
  } else {
    std::vector<std::thread> workers;
    std::atomic<uint32_t> next{0};
    uint32_t n_workers = std::min(parallelism, group_size);
    for (uint32_t w = 0; w < n_workers; ++w) {
      workers.emplace_back([&] {
        for (uint32_t i = next.fetch_add(1); i < group_size; i = next.fetch_add(1))
          sample_member(i);
      });
    }
    for (auto& t : workers) t.join();
  }
  return responses;
}

std::vector<double> normalize_advantages(const std::vector<double>& rewards, double std_floor) {
  if (rewards.size() < 2)
    throw InputError("advantage normalization needs at least 2 rewards, got " +
                     std::to_string(rewards.size()));
  size_t n = rewards.size();
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(n);
  double sd = std::sqrt(var);
  std::vector<double> adv(n, 0.0);
  if (sd < std_floor) return adv;  // degenerate group
  for (size_t i = 0; i < n; ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

namespace {

double state_kl(const std::vector<double>& p, const std::vector<double>& r) {
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i) kl += p[i] * (std::log(p[i]) - std::log(r[i]));
  return kl < 0.0 ? 0.0 : kl;  // clamp numerical noise; exact KL is >= 0
}

}  // namespace

double kl_divergence(const policy::PolicyParams& params, const policy::PolicyParams& ref,
                     const env::Episode& ep, const policy::VisitedStates& visited) {
  double total = 0.0;
  for (const policy::PolicyState& st : visited.steps) {
    auto p = policy::step_distribution(params, ep, st);
    auto r = policy::step_distribution(ref, ep, st);
    total += state_kl(p, r);
  }
  auto pa = policy::answer_distribution_rel(params, visited.kind, visited.answer_grounded);
  auto ra = policy::answer_distribution_rel(ref, visited.kind, visited.answer_grounded);
  total += state_kl(pa, ra);
  return total;
}

namespace {

struct RatioTerm {
  double rho = 0.0;
  double logp = 0.0;
  bool clipped_active = false;  // clipped branch strictly smaller -> zero gradient
};

RatioTerm ratio_term(const policy::PolicyParams& params, const env::Episode& ep,
                     const policy::Response& resp, double old_logprob, double advantage,
                     double eps, size_t index) {
  RatioTerm t;
  t.logp = policy::logprob(params, ep, resp);
  t.rho = std::exp(t.logp - old_logprob);
  if (!std::isfinite(t.rho))
    throw NumericalError("non-finite importance ratio at group index " + std::to_string(index) +
                         ": logprob=" + std::to_string(t.logp) +
                         " old_logprob=" + std::to_string(old_logprob));
  double clipped_rho = std::clamp(t.rho, 1.0 - eps, 1.0 + eps);
  double u = t.rho * advantage;
  double c = clipped_rho * advantage;
  t.clipped_active = c < u;  // ties resolve to the unclipped branch
  return t;
}

void check_batch(const GroupBatch& batch) {
  size_t g = batch.responses.size();
  if (g < 2 || batch.rewards.size() != g || batch.advantages.size() != g ||
      batch.old_logprobs.size() != g)
    throw InputError("group batch lists must all have the same length >= 2");
}

// dKL/dlogit for one state: p_j * (log(p_j/r_j) - KL).
std::vector<double> kl_logit_coeffs(const std::vector<double>& p, const std::vector<double>& r) {
  double kl = 0.0;
  std::vector<double> logratio(p.size());
  for (size_t i = 0; i < p.size(); ++i) {
    logratio[i] = std::log(p[i]) - std::log(r[i]);
    kl += p[i] * logratio[i];
  }
  std::vector<double> coeff(p.size());
  for (size_t i = 0; i < p.size(); ++i) coeff[i] = p[i] * (logratio[i] - kl);
  return coeff;
}

void accumulate_kl_grad(const policy::PolicyParams& params, const policy::PolicyParams& ref,
                        const env::Episode& ep, const policy::VisitedStates& visited,
                        double scale, policy::Gradient& out) {
  policy::EpisodeView view(ep);
  for (const policy::PolicyState& st : visited.steps) {
    auto p = policy::step_distribution(params, ep, st);
    auto r = policy::step_distribution(ref, ep, st);
    auto coeff = kl_logit_coeffs(p, r);
    for (double& c : coeff) c *= scale;
    policy::scatter_step_coeffs(params, view, st, coeff, out);
  }
  auto pa = policy::answer_distribution_rel(params, visited.kind, visited.answer_grounded);
  auto ra = policy::answer_distribution_rel(ref, visited.kind, visited.answer_grounded);
  auto coeff = kl_logit_coeffs(pa, ra);
  for (double& c : coeff) c *= scale;
  policy::scatter_answer_coeffs(params, visited.kind, visited.answer_grounded, coeff, out);
}

}  // namespace

double clipped_objective(const policy::PolicyParams& params, const GroupBatch& batch,
                         const policy::PolicyParams& ref, double clip_epsilon, double kl_beta) {
  check_batch(batch);
  size_t g = batch.responses.size();
  double total = 0.0;
  for (size_t i = 0; i < g; ++i) {
    RatioTerm t = ratio_term(params, batch.episode, batch.responses[i], batch.old_logprobs[i],
                             batch.advantages[i], clip_epsilon, i);
    double clipped_rho = std::clamp(t.rho, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    double surrogate = std::min(t.rho * batch.advantages[i], clipped_rho * batch.advantages[i]);
    auto visited = policy::visited_states(batch.episode, batch.responses[i]);
    total += surrogate - kl_beta * kl_divergence(params, ref, batch.episode, visited);
  }
  return total / static_cast<double>(g);
}

policy::Gradient objective_grad(const policy::PolicyParams& params, const GroupBatch& batch,
                                const policy::PolicyParams& ref, double clip_epsilon,
                                double kl_beta) {
  check_batch(batch);
  size_t g = batch.responses.size();
  policy::Gradient grad(params);
  double inv_g = 1.0 / static_cast<double>(g);
  for (size_t i = 0; i < g; ++i) {
    RatioTerm t = ratio_term(params, batch.episode, batch.responses[i], batch.old_logprobs[i],
                             batch.advantages[i], clip_epsilon, i);
    if (!t.clipped_active && batch.advantages[i] != 0.0) {
      // d/dtheta [rho * A] = rho * A * dlogp/dtheta
      policy::accumulate_logprob_grad(params, batch.episode, batch.responses[i],
                                      inv_g * t.rho * batch.advantages[i], grad);
    }
    if (kl_beta != 0.0) {
      auto visited = policy::visited_states(batch.episode, batch.responses[i]);
      accumulate_kl_grad(params, ref, batch.episode, visited, -inv_g * kl_beta, grad);
    }
  }
  return grad;
}

GroupBatch score_group(const env::Episode& ep, std::vector<policy::Response> responses,
                       std::vector<double> old_logprobs, const rewards::RewardConfig& rcfg,
                       env::EvidenceMode evidence_mode, const JudgeFn& judge_fn,
                       double std_floor) {
  GroupBatch batch;
  batch.episode = ep;
  batch.responses = std::move(responses);
  batch.old_logprobs = std::move(old_logprobs);
  env::EvidenceList evidence = env::gen_evidence(ep, evidence_mode);
  for (const policy::Response& resp : batch.responses) {
    double acc = rewards::accuracy_reward(ep, resp);
    double fmt = rewards::format_reward(resp, ep, rcfg);
    double len = rewards::length_reward(resp, rcfg);
    judge::Verdict verdict = judge_fn(resp, evidence, ep);
    rewards::RewardBreakdown b = rewards::compose(acc, fmt, len, verdict.e, rcfg);
    batch.rewards.push_back(b.evid_total);
    batch.verdicts.push_back(verdict.e);
  }
  batch.advantages = normalize_advantages(batch.rewards, std_floor);
  return batch;
}

TrainResult train(const TrainConfig& cfg, const env::EnvConfig& env_cfg,
                  const rewards::RewardConfig& reward_cfg,
                  const policy::PolicyParams& initial_params, const JudgeFn& judge_fn) {
  validate(cfg);
  env::validate(env_cfg);
  rewards::validate(reward_cfg);

  TrainResult result;
  result.params = initial_params;
  result.reference = policy::reference_snapshot(initial_params);

  for (uint32_t iter = 0; iter < cfg.iterations; ++iter) {
    policy::PolicyParams params_old = policy::reference_snapshot(result.params);
    policy::Gradient grad(result.params);

    double sum_reward = 0.0, sum_abs_adv = 0.0, sum_kl = 0.0;
    uint32_t n_responses = 0, n_clipped = 0, n_correct = 0, n_grounded_correct = 0;

    for (uint32_t e = 0; e < cfg.episodes_per_iter; ++e) {
      uint64_t ep_index = static_cast<uint64_t>(iter) * cfg.episodes_per_iter + e;
      env::Episode ep = env::gen_episode(env_cfg, ep_index);
      uint64_t base_stream = rng::derive_stream(cfg.seed, 0x9e1ULL + iter, e);
      auto responses = rollout_group(params_old, ep, cfg.group_size, policy::Mode::cot,
                                     cfg.trace_len, base_stream, cfg.parallelism);
      std::vector<double> old_logprobs;
      old_logprobs.reserve(responses.size());
      for (const auto& r : responses) old_logprobs.push_back(r.total_logprob);

      GroupBatch batch = score_group(ep, std::move(responses), std::move(old_logprobs),
                                     reward_cfg, cfg.evidence_mode, judge_fn, cfg.std_floor);

      for (size_t i = 0; i < batch.responses.size(); ++i) {
        const auto& resp = batch.responses[i];
        sum_reward += batch.rewards[i];
        sum_abs_adv += std::abs(batch.advantages[i]);
        double lp = policy::logprob(result.params, ep, resp);
        double rho = std::exp(lp - batch.old_logprobs[i]);
        if (rho < 1.0 - cfg.clip_epsilon || rho > 1.0 + cfg.clip_epsilon) ++n_clipped;
        auto visited = policy::visited_states(ep, resp);
        sum_kl += kl_divergence(result.params, result.reference, ep, visited);
        if (env::check_answer(ep, resp.answer)) {
          ++n_correct;
          if (batch.verdicts[i] == 1) ++n_grounded_correct;
        }
        ++n_responses;
      }

      policy::Gradient group_grad =
          objective_grad(result.params, batch, result.reference, cfg.clip_epsilon, cfg.kl_beta);
      grad.add_scaled(group_grad, 1.0 / cfg.episodes_per_iter);
    }

    if (!std::isfinite(grad.max_abs()))
      throw NumericalError("non-finite gradient at iteration " + std::to_string(iter));
    policy::apply_ascent(result.params, grad, cfg.learning_rate);

    IterRecord rec;
    rec.iter = iter;
    rec.mean_reward = sum_reward / n_responses;
    rec.mean_abs_advantage = sum_abs_adv / n_responses;
    rec.clip_fraction = static_cast<double>(n_clipped) / n_responses;
    rec.kl_to_ref = sum_kl / n_responses;
    rec.accuracy = static_cast<double>(n_correct) / n_responses;
    rec.grounding_rate =
        n_correct == 0 ? 0.0 : static_cast<double>(n_grounded_correct) / n_correct;
    result.report.iterations.push_back(rec);
  }
  return result;
}

}  // namespace ver::grpo
