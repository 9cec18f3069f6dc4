#include <doctest.h>

#include <cmath>

#include "ver/analysis.hpp"

using namespace ver;
using analysis::DriftConfig;
using analysis::TieRule;

namespace {

env::EnvConfig eval_env_cfg(uint64_t seed = 4) {
  env::EnvConfig cfg;
  cfg.n_facts_per_video = 4;
  cfg.fact_vocab_size = 24;
  cfg.filler_vocab_size = 8;
  cfg.n_options = 4;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("simulate_drift") {
  SUBCASE("zero step error always succeeds") {
    DriftConfig cfg;
    cfg.step_error = 0.0;
    cfg.chain_lengths = {1, 5, 20};
    cfg.trials = 500;
    for (const auto& p : analysis::simulate_drift(cfg)) CHECK(p.success_rate == 1.0);
  }

  SUBCASE("certain step error always fails") {
    DriftConfig cfg;
    cfg.step_error = 1.0;
    cfg.chain_lengths = {1, 3};
    cfg.trials = 500;
    for (const auto& p : analysis::simulate_drift(cfg)) CHECK(p.success_rate == 0.0);
  }

  SUBCASE("empirical rate tracks the analytic product") {
    DriftConfig cfg;
    cfg.step_error = 0.01;
    cfg.chain_lengths = {10};
    cfg.trials = 10000;
    cfg.seed = 3;
    auto points = analysis::simulate_drift(cfg);
    double expected = std::pow(0.99, 10);  // 0.904382...
    CHECK(expected == doctest::Approx(0.904382).epsilon(1e-5));
    double sigma = std::sqrt(expected * (1.0 - expected) / cfg.trials);
    CHECK(std::abs(points[0].success_rate - expected) <= 3.0 * sigma);
  }

  SUBCASE("deterministic in seed and random-access in (T, trial)") {
    DriftConfig cfg;
    cfg.step_error = 0.05;
    cfg.chain_lengths = {2, 4};
    cfg.trials = 1000;
    cfg.seed = 9;
    auto a = analysis::simulate_drift(cfg);
    auto b = analysis::simulate_drift(cfg);
    CHECK(a[0].success_rate == b[0].success_rate);
    CHECK(a[1].success_rate == b[1].success_rate);
    // Reordering chain lengths does not change per-T results.
    DriftConfig swapped = cfg;
    swapped.chain_lengths = {4, 2};
    auto c = analysis::simulate_drift(swapped);
    CHECK(c[1].success_rate == a[0].success_rate);
    CHECK(c[0].success_rate == a[1].success_rate);
  }

  SUBCASE("fitted slope approximates the step error for small errors") {
    DriftConfig cfg;
    cfg.step_error = 0.01;
    cfg.chain_lengths = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    cfg.trials = 10000;
    cfg.seed = 1;
    double slope = analysis::fitted_failure_slope(analysis::simulate_drift(cfg));
    CHECK(std::abs(slope - cfg.step_error) / cfg.step_error < 0.2);
  }
}

TEST_CASE("dilution_curve") {
  auto flat = analysis::dilution_curve(0.0, 5);
  for (double v : flat) CHECK(v == 1.0);

  auto harmonic = analysis::dilution_curve(1.0, 4);
  CHECK(harmonic[0] == doctest::Approx(1.0));
  CHECK(harmonic[1] == doctest::Approx(0.5));
  CHECK(harmonic[2] == doctest::Approx(1.0 / 3.0));
  CHECK(harmonic[3] == doctest::Approx(0.25));

  auto decaying = analysis::dilution_curve(0.25, 12);
  for (size_t i = 1; i < decaying.size(); ++i) CHECK(decaying[i] < decaying[i - 1]);
}

TEST_CASE("majority_vote") {
  CHECK(analysis::majority_vote({1, 1, 2}) == 1);
  CHECK(analysis::majority_vote({2, 1}) == 1);  // tie -> lowest index
  CHECK(analysis::majority_vote({2, 1}, TieRule::first_seen) == 2);

  std::vector<uint32_t> twenty;
  for (int i = 0; i < 11; ++i) twenty.push_back(3);
  for (int i = 0; i < 5; ++i) twenty.push_back(1);
  for (int i = 0; i < 4; ++i) twenty.push_back(2);
  CHECK(twenty.size() == 20);
  CHECK(analysis::majority_vote(twenty) == 3);

  SUBCASE("permutation invariance") {
    rng::Rng r(17);
    std::vector<uint32_t> votes = {1, 2, 2, 3, 3, 3, 4, 1, 2};
    uint32_t base = analysis::majority_vote(votes);
    for (int t = 0; t < 30; ++t) {
      for (size_t i = votes.size(); i > 1; --i)
        std::swap(votes[i - 1], votes[r.next_below(i)]);
      CHECK(analysis::majority_vote(votes) == base);
    }
  }

  CHECK_THROWS_AS(analysis::majority_vote({}), InputError);
}

TEST_CASE("eval_policy") {
  env::EnvConfig env_cfg = eval_env_cfg(6);
  policy::InitConfig init;
  init.noise_scale = 0.0;

  SUBCASE("uniform answer head converges to chance accuracy") {
    policy::PolicyParams p = policy::init_params(env_cfg, init);
    analysis::EvalConfig ecfg;
    ecfg.n_episodes = 2000;
    ecfg.mode = policy::Mode::direct;
    ecfg.temperature = 1.0;
    ecfg.seed = 8;
    auto m = analysis::eval_policy(p, env_cfg, ecfg);
    double sigma = std::sqrt(0.25 * 0.75 / ecfg.n_episodes);
    CHECK(std::abs(m.accuracy - 0.25) <= 3.0 * sigma);
    CHECK(m.mean_trace_len == 0.0);
  }

  SUBCASE("repeated deterministic evaluation is identical") {
    policy::PolicyParams p = policy::calibrated_preset(env_cfg, init);
    analysis::EvalConfig ecfg;
    ecfg.n_episodes = 50;
    ecfg.votes = 1;
    ecfg.temperature = 0.0;  // argmax decoding
    auto a = analysis::eval_policy(p, env_cfg, ecfg);
    auto b = analysis::eval_policy(p, env_cfg, ecfg);
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.grounding_rate == b.grounding_rate);
  }

  SUBCASE("voting changes nothing for a deterministic policy") {
    policy::PolicyParams p = policy::calibrated_preset(env_cfg, init);
    analysis::EvalConfig one;
    one.n_episodes = 100;
    one.votes = 1;
    one.temperature = 0.0;
    analysis::EvalConfig many = one;
    many.votes = 7;
    auto a = analysis::eval_policy(p, env_cfg, one);
    auto b = analysis::eval_policy(p, env_cfg, many);
    CHECK(a.accuracy == b.accuracy);
  }
}

TEST_CASE("grounding_rate") {
  env::EnvConfig env_cfg = eval_env_cfg(7);
  policy::InitConfig init;
  init.noise_scale = 0.0;

  SUBCASE("a policy that always cites first scores 1.0") {
    policy::PolicyParams p = policy::calibrated_preset(env_cfg, init);
    for (int k = 0; k < policy::kNumKinds; ++k) {
      p.vis_table[k][static_cast<int>(policy::VisClass::evidence_fact)] = 400.0;
      p.vis_table[k][static_cast<int>(policy::VisClass::absent_fact)] = -400.0;
    }
    double rate = analysis::grounding_rate(p, env_cfg, grpo::rule_judge_fn(), 300,
                                           env::EvidenceMode::QD, 8, 3);
    CHECK(rate == 1.0);
  }

  SUBCASE("a filler-only policy scores 0.0") {
    policy::PolicyParams p = policy::init_params(env_cfg, init);
    for (int k = 0; k < policy::kNumKinds; ++k)
      p.vis_table[k][static_cast<int>(policy::VisClass::filler)] = 400.0;
    p.w_vis = 1.0;
    double rate = analysis::grounding_rate(p, env_cfg, grpo::rule_judge_fn(), 300,
                                           env::EvidenceMode::QD, 8, 4);
    CHECK(rate == 0.0);
  }

  SUBCASE("mixed policy rate matches a recount from the response log") {
    policy::PolicyParams p = policy::calibrated_preset(env_cfg, init);
    std::vector<analysis::ResponseRecord> log;
    double rate = analysis::grounding_rate(p, env_cfg, grpo::rule_judge_fn(), 500,
                                           env::EvidenceMode::QD, 12, 5, &log);
    REQUIRE(log.size() == 500);
    uint64_t correct = 0, grounded = 0;
    for (const auto& rec : log) {
      if (rec.correct) {
        ++correct;
        if (rec.verdict == 1) ++grounded;
      }
    }
    double recount = correct == 0 ? 0.0 : static_cast<double>(grounded) / correct;
    CHECK(rate == recount);
    CHECK(correct > 0);
  }
}
