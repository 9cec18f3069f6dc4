#include <doctest.h>

#include <cmath>

#include "ver/env.hpp"
#include "ver/policy.hpp"
#include "ver/rng.hpp"

using namespace ver;
using policy::Mode;
using policy::PolicyParams;
using policy::Response;

namespace {

env::EnvConfig test_env_cfg(uint64_t seed = 1) {
  env::EnvConfig cfg;
  cfg.n_facts_per_video = 4;
  cfg.fact_vocab_size = 16;
  cfg.filler_vocab_size = 6;
  cfg.n_options = 4;
  cfg.seed = seed;
  return cfg;
}

PolicyParams zero_params(const env::EnvConfig& cfg) {
  policy::InitConfig init;
  init.noise_scale = 0.0;
  return policy::init_params(cfg, init);
}

PolicyParams random_params(const env::EnvConfig& cfg, uint64_t seed, double scale = 0.8) {
  policy::InitConfig init;
  init.noise_scale = scale;
  init.seed = seed;
  return policy::init_params(cfg, init);
}

Response random_response(const PolicyParams& params, const env::Episode& ep, uint64_t seed,
                         uint32_t trace_len = 6) {
  rng::Rng r(seed);
  return policy::sample_response(params, ep, Mode::cot, trace_len, r);
}

}  // namespace

TEST_CASE("dilution schedule") {
  CHECK(policy::dilution_lambda(0.0, 1) == 1.0);
  CHECK(policy::dilution_lambda(0.0, 7) == 1.0);
  CHECK(policy::dilution_lambda(1.0, 3) == doctest::Approx(1.0 / 3.0));
  CHECK(policy::dilution_lambda(0.25, 1) == 1.0);
}

TEST_CASE("init_params") {
  env::EnvConfig cfg = test_env_cfg();

  SUBCASE("zero noise gives uniform distributions") {
    PolicyParams p = zero_params(cfg);
    env::Episode ep = env::gen_episode(cfg, 0);
    policy::PolicyState st;
    st.kind = ep.question.kind;
    auto dist = policy::step_distribution(p, ep, st);
    for (double v : dist) CHECK(v == doctest::Approx(1.0 / dist.size()).epsilon(1e-12));
    auto ans = policy::answer_distribution(p, ep, true);
    for (double v : ans) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }

  SUBCASE("same seed twice gives identical params") {
    PolicyParams a = random_params(cfg, 42);
    PolicyParams b = random_params(cfg, 42);
    for (size_t i = 0; i < policy::num_learnable(a); ++i)
      CHECK(policy::get_flat(a, i) == policy::get_flat(b, i));
  }

  SUBCASE("negative scale is a configuration error") {
    policy::InitConfig init;
    init.w_vis = -0.1;
    CHECK_THROWS_AS(policy::init_params(cfg, init), ConfigError);
    policy::InitConfig init2;
    init2.noise_scale = -1.0;
    CHECK_THROWS_AS(policy::init_params(cfg, init2), ConfigError);
  }
}

TEST_CASE("step_distribution is a strictly positive probability vector") {
  env::EnvConfig cfg = test_env_cfg(3);
  env::Episode ep = env::gen_episode(cfg, 2);
  for (uint64_t s = 0; s < 10; ++s) {
    PolicyParams p = random_params(cfg, s, 2.0);
    policy::PolicyState st;
    st.kind = ep.question.kind;
    st.t = 1 + s % 8;
    st.last = static_cast<policy::LastClass>(s % 4);
    auto dist = policy::step_distribution(p, ep, st);
    double sum = 0.0;
    for (double v : dist) {
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("w_vis = 0 removes the visual channel") {
  env::EnvConfig cfg = test_env_cfg(5);
  PolicyParams p = random_params(cfg, 9);
  p.w_vis = 0.0;
  env::Episode a = env::gen_episode(cfg, 0);
  env::Episode b = env::gen_episode(cfg, 1);
  // Force identical question kind so the language row matches.
  policy::PolicyState st;
  st.kind = a.question.kind;
  auto da = policy::step_distribution(p, a, st);
  st.kind = a.question.kind;
  env::Episode b_same_kind = b;
  b_same_kind.question.kind = a.question.kind;
  auto db = policy::step_distribution(p, b_same_kind, st);
  for (size_t i = 0; i < da.size(); ++i) CHECK(da[i] == doctest::Approx(db[i]).epsilon(1e-15));
}

TEST_CASE("direct mode contract") {
  env::EnvConfig cfg = test_env_cfg(7);
  env::Episode ep = env::gen_episode(cfg, 0);
  PolicyParams p = random_params(cfg, 1);

  rng::Rng r(99);
  Response resp = policy::sample_response(p, ep, Mode::direct, 0, r);
  CHECK(resp.trace.empty());
  CHECK(resp.step_logprobs.size() == 1);
  CHECK(resp.answer >= 1);
  CHECK(resp.answer <= cfg.n_options);

  SUBCASE("invariant to trace-channel tables") {
    PolicyParams q = p;
    for (auto& row : q.lang_table)
      for (double& v : row) v += 3.0;
    for (auto& row : q.vis_table)
      for (double& v : row) v -= 2.0;
    rng::Rng r1(99), r2(99);
    Response a = policy::sample_response(p, ep, Mode::direct, 0, r1);
    Response b = policy::sample_response(q, ep, Mode::direct, 0, r2);
    CHECK(a.answer == b.answer);
    CHECK(a.total_logprob == b.total_logprob);
  }

  SUBCASE("mode/trace_len preconditions") {
    rng::Rng rr(1);
    CHECK_THROWS_AS(policy::sample_response(p, ep, Mode::direct, 3, rr), InputError);
    CHECK_THROWS_AS(policy::sample_response(p, ep, Mode::cot, 0, rr), InputError);
    CHECK_THROWS_AS(policy::sample_response(p, ep, Mode::cot, policy::kMaxTraceLen + 1, rr),
                    InputError);
  }
}

TEST_CASE("grounding state machine") {
  env::EnvConfig cfg = test_env_cfg(11);
  cfg.question_kinds = {env::QuestionKind::slot};
  env::Episode ep = env::gen_episode(cfg, 0);
  env::FactId qd = ep.required_fact();
  env::FactId oov = env::hallucination_candidates(ep)[0];
  env::TraceToken filler = ep.fact_vocab_size;  // first filler token

  PolicyParams p = zero_params(cfg);

  SUBCASE("citation before hallucination keeps grounding") {
    Response resp;
    resp.mode = Mode::cot;
    resp.trace = {filler, qd, oov};
    resp.answer = ep.truth;
    auto visited = policy::visited_states(ep, resp);
    CHECK(visited.answer_grounded);
  }

  SUBCASE("hallucination before citation corrupts grounding") {
    Response resp;
    resp.mode = Mode::cot;
    resp.trace = {oov, qd};
    resp.answer = ep.truth;
    auto visited = policy::visited_states(ep, resp);
    CHECK_FALSE(visited.answer_grounded);
  }

  SUBCASE("a neutral chain leaves the answer head uncorrupted") {
    Response resp;
    resp.mode = Mode::cot;
    resp.trace = {filler, filler};
    resp.answer = ep.truth;
    CHECK(policy::visited_states(ep, resp).answer_grounded);
  }

  SUBCASE("hallucination after citation does not corrupt") {
    Response resp;
    resp.mode = Mode::cot;
    resp.trace = {qd, oov, oov};
    resp.answer = ep.truth;
    CHECK(policy::visited_states(ep, resp).answer_grounded);
  }

  SUBCASE("state bits are monotone along any trace") {
    for (uint64_t s = 0; s < 50; ++s) {
      Response resp = random_response(random_params(cfg, s), ep, s, 10);
      auto visited = policy::visited_states(ep, resp);
      bool cited = false, halluc = false;
      for (const auto& st : visited.steps) {
        CHECK((st.cited_required || !cited));  // never true -> false
        CHECK((st.hallucinated || !halluc));
        cited = st.cited_required;
        halluc = st.hallucinated;
      }
    }
  }
}

TEST_CASE("sampling is deterministic given the stream") {
  env::EnvConfig cfg = test_env_cfg(13);
  env::Episode ep = env::gen_episode(cfg, 0);
  PolicyParams p = random_params(cfg, 21);
  rng::Rng r1(777), r2(777);
  Response a = policy::sample_response(p, ep, Mode::cot, 8, r1);
  Response b = policy::sample_response(p, ep, Mode::cot, 8, r2);
  CHECK(a.trace == b.trace);
  CHECK(a.answer == b.answer);
  CHECK(a.total_logprob == b.total_logprob);
}

TEST_CASE("logprob") {
  env::EnvConfig cfg = test_env_cfg(17);
  env::Episode ep = env::gen_episode(cfg, 0);

  SUBCASE("uniform zero-init params in direct mode give log(1/4)") {
    PolicyParams p = zero_params(cfg);
    Response resp;
    resp.mode = Mode::direct;
    resp.answer = 2;
    CHECK(policy::logprob(p, ep, resp) == doctest::Approx(std::log(0.25)).epsilon(1e-12));
  }

  SUBCASE("logprob of any response is <= 0") {
    for (uint64_t s = 0; s < 20; ++s) {
      PolicyParams p = random_params(cfg, s);
      Response resp = random_response(p, ep, 1000 + s);
      CHECK(policy::logprob(p, ep, resp) <= 0.0);
      for (double lp : resp.step_logprobs) CHECK(lp <= 0.0);
    }
  }

  SUBCASE("replay equality with the sampler's accumulator") {
    for (uint64_t s = 0; s < 50; ++s) {
      PolicyParams p = random_params(cfg, s, 1.5);
      Response resp = random_response(p, ep, 2000 + s, 12);
      double replayed = policy::logprob(p, ep, resp);
      CHECK(std::abs(replayed - resp.total_logprob) < 1e-9);
      CHECK(resp.total_logprob == doctest::Approx(replayed).epsilon(1e-12));
    }
  }

  SUBCASE("malformed trace tokens raise input errors") {
    PolicyParams p = zero_params(cfg);
    Response resp;
    resp.mode = Mode::cot;
    resp.trace = {cfg.n_trace_tokens()};  // one past the vocabulary
    resp.answer = 1;
    CHECK_THROWS_AS(policy::logprob(p, ep, resp), InputError);
    resp.trace = {0};
    resp.answer = 0;
    CHECK_THROWS_AS(policy::logprob(p, ep, resp), InputError);
  }
}

TEST_CASE("logprob_grad structure") {
  env::EnvConfig cfg = test_env_cfg(19);
  env::Episode ep = env::gen_episode(cfg, 0);
  PolicyParams p = random_params(cfg, 4);

  SUBCASE("unvisited states have zero gradient") {
    Response resp;
    resp.mode = Mode::direct;
    resp.answer = 1;
    policy::Gradient g = policy::logprob_grad(p, ep, resp);
    for (const auto& row : g.lang_table)
      for (double v : row) CHECK(v == 0.0);
    for (const auto& row : g.vis_table)
      for (double v : row) CHECK(v == 0.0);
    CHECK(g.w_lang == 0.0);
    CHECK(g.w_vis == 0.0);
    // Only the (grounded, kind) answer block is touched.
    bool grounded_block_nonzero = false;
    for (uint32_t rel = 0; rel < p.n_options; ++rel) {
      CHECK(g.answer_table[p.answer_index(0, ep.question.kind, rel)] == 0.0);
      if (g.answer_table[p.answer_index(1, ep.question.kind, rel)] != 0.0)
        grounded_block_nonzero = true;
    }
    CHECK(grounded_block_nonzero);
  }

  SUBCASE("visited rows satisfy the softmax zero-sum identity") {
    for (uint64_t s = 0; s < 20; ++s) {
      Response resp = random_response(p, ep, 3000 + s, 9);
      policy::Gradient g = policy::logprob_grad(p, ep, resp);
      for (const auto& row : g.lang_table) {
        double sum = 0.0;
        for (double v : row) sum += v;
        CHECK(std::abs(sum) < 1e-12);
      }
      for (const auto& row : g.vis_table) {
        double sum = 0.0;
        for (double v : row) sum += v;
        CHECK(std::abs(sum) < 1e-12);
      }
      for (int grounded = 0; grounded < 2; ++grounded) {
        for (int kind = 0; kind < 2; ++kind) {
          double sum = 0.0;
          for (uint32_t rel = 0; rel < p.n_options; ++rel)
            sum += g.answer_table[p.answer_index(
                grounded, kind == 0 ? env::QuestionKind::slot : env::QuestionKind::presence,
                rel)];
          CHECK(std::abs(sum) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("logprob_grad matches central finite differences") {
  env::EnvConfig cfg = test_env_cfg(23);
  const double step = 1e-5;
  int checked = 0;
  for (uint64_t trial = 0; trial < 100; ++trial) {
    env::Episode ep = env::gen_episode(cfg, trial % 17);
    PolicyParams p = random_params(cfg, 500 + trial, 1.2);
    p.dilution_kappa = 0.25 * (trial % 3);
    uint32_t trace_len = 1 + trial % 12;
    Response resp = (trial % 7 == 0)
                        ? [&] {
                            rng::Rng r(trial);
                            return policy::sample_response(p, ep, Mode::direct, 0, r);
                          }()
                        : random_response(p, ep, 4000 + trial, trace_len);

    policy::Gradient g = policy::logprob_grad(p, ep, resp);
    size_t n = policy::num_learnable(p);
    double max_abs_grad = 1e-12, max_abs_err = 0.0;
    for (size_t i = 0; i < n; ++i) {
      PolicyParams plus = p, minus = p;
      policy::set_flat(plus, i, policy::get_flat(p, i) + step);
      policy::set_flat(minus, i, policy::get_flat(p, i) - step);
      double fd = (policy::logprob(plus, ep, resp) - policy::logprob(minus, ep, resp)) /
                  (2.0 * step);
      double analytic = policy::grad_flat(g, i);
      max_abs_grad = std::max(max_abs_grad, std::abs(analytic));
      max_abs_err = std::max(max_abs_err, std::abs(fd - analytic));
    }
    CHECK(max_abs_err / std::max(1.0, max_abs_grad) < 1e-6);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("reference_snapshot is a deep copy") {
  env::EnvConfig cfg = test_env_cfg(29);
  PolicyParams p = random_params(cfg, 77);
  PolicyParams snap = policy::reference_snapshot(p);
  PolicyParams snap2 = policy::reference_snapshot(snap);

  double before = policy::get_flat(snap, 0);
  policy::set_flat(p, 0, before + 5.0);
  CHECK(policy::get_flat(snap, 0) == before);

  for (size_t i = 0; i < policy::num_learnable(p); ++i)
    CHECK(policy::get_flat(snap2, i) == policy::get_flat(snap, i));
}
