#include "ver/policy.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "ver/errors.hpp"

namespace ver::policy {

const char* to_string(Mode m) { return m == Mode::direct ? "direct" : "cot"; }

Mode mode_from_string(const std::string& s) {
  if (s == "direct") return Mode::direct;
  if (s == "cot") return Mode::cot;
  throw ConfigError("unknown generation mode: " + s);
}

int lang_row(const PolicyState& st) {
  int kind = st.kind == env::QuestionKind::slot ? 0 : 1;
  return (static_cast<int>(st.last) * kNumKinds + kind) * 2 + (st.cited_required ? 1 : 0);
}

double dilution_lambda(double kappa, uint32_t t) {
  return 1.0 / (1.0 + kappa * static_cast<double>(t - 1));
}

size_t PolicyParams::answer_index(int g, env::QuestionKind kind, uint32_t rel) const {
  int k = kind == env::QuestionKind::slot ? 0 : 1;
  return (static_cast<size_t>(g) * kNumKinds + k) * n_options + rel;
}

double& PolicyParams::answer_at(int g, env::QuestionKind kind, uint32_t rel) {
  return answer_table[answer_index(g, kind, rel)];
}

double PolicyParams::answer_at(int g, env::QuestionKind kind, uint32_t rel) const {
  return answer_table[answer_index(g, kind, rel)];
}

PolicyParams init_params(const env::EnvConfig& env_cfg, const InitConfig& init_cfg) {
  env::validate(env_cfg);
  if (init_cfg.noise_scale < 0.0)
    throw ConfigError("noise_scale must be >= 0, got " + std::to_string(init_cfg.noise_scale));
  if (init_cfg.w_lang < 0.0 || init_cfg.w_vis < 0.0)
    throw ConfigError("channel scales must be >= 0, got w_lang=" +
                      std::to_string(init_cfg.w_lang) + " w_vis=" +
                      std::to_string(init_cfg.w_vis));
  if (init_cfg.dilution_kappa < 0.0)
    throw ConfigError("dilution_kappa must be >= 0, got " +
                      std::to_string(init_cfg.dilution_kappa));

  PolicyParams p;
  p.n_options = env_cfg.n_options;
  p.answer_table.assign(2 * kNumKinds * env_cfg.n_options, 0.0);
  p.w_lang = init_cfg.w_lang;
  p.w_vis = init_cfg.w_vis;
  p.dilution_kappa = init_cfg.dilution_kappa;

  rng::Rng r(rng::derive_stream(init_cfg.seed, 0x70a9c));
  for (auto& row : p.lang_table)
    for (double& v : row) v = r.next_symmetric(init_cfg.noise_scale);
  for (auto& row : p.vis_table)
    for (double& v : row) v = r.next_symmetric(init_cfg.noise_scale);
  for (double& v : p.answer_table) v = r.next_symmetric(init_cfg.noise_scale);
  return p;
}

PolicyParams calibrated_preset(const env::EnvConfig& env_cfg, const InitConfig& init_cfg) {
  InitConfig zero = init_cfg;
  zero.noise_scale = 0.0;
  PolicyParams p = init_params(env_cfg, zero);
  for (int k = 0; k < kNumKinds; ++k) {
    p.vis_table[k][static_cast<int>(VisClass::evidence_fact)] = 4.0;
    p.vis_table[k][static_cast<int>(VisClass::video_fact)] = 2.0;
    p.vis_table[k][static_cast<int>(VisClass::absent_fact)] = -2.0;
    p.vis_table[k][static_cast<int>(VisClass::filler)] = 0.0;
  }
  // Accurate answers only while the grounding bit survives the chain.
  p.answer_at(1, env::QuestionKind::slot, 0) = 2.2;
  p.answer_at(1, env::QuestionKind::presence, 0) = 2.2;
  return p;
}

EpisodeView::EpisodeView(const env::Episode& e) : ep(&e), required(e.required_fact()) {
  uint32_t n = e.n_trace_tokens();
  vis_class.resize(n);
  lang_class.resize(n);
  for (uint32_t tok = 0; tok < n; ++tok) {
    if (tok >= e.fact_vocab_size) {
      vis_class[tok] = VisClass::filler;
      lang_class[tok] = LangClass::filler;
    } else {
      lang_class[tok] = LangClass::fact;
      if (tok == required) vis_class[tok] = VisClass::evidence_fact;
      else if (e.fact_in_video(tok)) vis_class[tok] = VisClass::video_fact;
      else vis_class[tok] = VisClass::absent_fact;
    }
  }
}

LastClass EpisodeView::classify_last(env::TraceToken t) const {
  switch (vis_class[t]) {
    case VisClass::filler: return LastClass::filler;
    case VisClass::absent_fact: return LastClass::absent_fact;
    default: return LastClass::video_fact;
  }
}

namespace {

void softmax_inplace(std::vector<double>& z) {
  double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

std::vector<double> step_logits(const PolicyParams& params, const EpisodeView& view,
                                const PolicyState& st) {
  int row = lang_row(st);
  int kind = st.kind == env::QuestionKind::slot ? 0 : 1;
  double lam = dilution_lambda(params.dilution_kappa, st.t);
  size_t n = view.vis_class.size();
  std::vector<double> z(n);
  for (size_t tok = 0; tok < n; ++tok) {
    z[tok] = params.w_lang * params.lang_table[row][static_cast<int>(view.lang_class[tok])] +
             lam * params.w_vis * params.vis_table[kind][static_cast<int>(view.vis_class[tok])];
  }
  return z;
}

std::vector<double> answer_logits_rel(const PolicyParams& params, env::QuestionKind kind,
                                      bool grounded) {
  std::vector<double> z(params.n_options);
  for (uint32_t rel = 0; rel < params.n_options; ++rel)
    z[rel] = params.answer_at(grounded ? 1 : 0, kind, rel);
  return z;
}

// Truth-relative index of a 1-based literal option.
uint32_t rel_of_answer(const env::Episode& ep, uint32_t answer) {
  if (answer == ep.truth) return 0;
  return answer < ep.truth ? answer : answer - 1;
}

uint32_t answer_of_rel(const env::Episode& ep, uint32_t rel) {
  if (rel == 0) return ep.truth;
  return rel < ep.truth ? rel : rel + 1;
}

size_t sample_from(std::span<const double> probs, rng::Rng& rng) {
  double u = rng.next_double();
  double acc = 0.0;
  for (size_t i = 0; i + 1 < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

size_t argmax_index(std::span<const double> v) {
  size_t best = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

void check_compatible(const PolicyParams& params, const env::Episode& ep) {
  if (params.n_options != ep.n_options)
    throw InputError("answer head sized for " + std::to_string(params.n_options) +
                     " options but episode has " + std::to_string(ep.n_options));
}

}  // namespace

std::vector<double> step_distribution(const PolicyParams& params, const env::Episode& ep,
                                      const PolicyState& st) {
  EpisodeView view(ep);
  auto z = step_logits(params, view, st);
  softmax_inplace(z);
  return z;
}

std::vector<double> answer_distribution(const PolicyParams& params, const env::Episode& ep,
                                        bool grounded_effective) {
  check_compatible(params, ep);
  auto z = answer_logits_rel(params, ep.question.kind, grounded_effective);
  softmax_inplace(z);
  std::vector<double> literal(params.n_options);
  for (uint32_t a = 1; a <= params.n_options; ++a)
    literal[a - 1] = z[rel_of_answer(ep, a)];
  return literal;
}

std::vector<double> answer_distribution_rel(const PolicyParams& params,
                                            env::QuestionKind kind, bool grounded) {
  auto z = answer_logits_rel(params, kind, grounded);
  softmax_inplace(z);
  return z;
}

void advance_state(const EpisodeView& view, PolicyState& st, env::TraceToken tok) {
  switch (view.vis_class[tok]) {
    case VisClass::filler:
      st.last = LastClass::filler;
      break;
    case VisClass::absent_fact:
      if (!st.cited_required) st.hallucinated = true;
      st.last = LastClass::absent_fact;
      break;
    case VisClass::evidence_fact:
      st.cited_required = true;
      st.last = LastClass::video_fact;
      break;
    case VisClass::video_fact:
      st.last = LastClass::video_fact;
      break;
  }
  st.t += 1;
}

bool effective_grounding(Mode mode, const PolicyState& st) {
  if (mode == Mode::direct) return true;  // no chain, nothing to corrupt
  return !st.hallucinated;
}

Response sample_response(const PolicyParams& params, const env::Episode& ep, Mode mode,
                         uint32_t trace_len, rng::Rng& rng, double temperature) {
  check_compatible(params, ep);
  if (mode == Mode::direct && trace_len != 0)
    throw InputError("direct mode requires trace_len 0, got " + std::to_string(trace_len));
  if (mode == Mode::cot && trace_len == 0)
    throw InputError("cot mode requires trace_len >= 1");
  if (trace_len > kMaxTraceLen)
    throw InputError("trace_len " + std::to_string(trace_len) + " exceeds maximum " +
                     std::to_string(kMaxTraceLen));
  if (temperature < 0.0) throw InputError("temperature must be >= 0");

  EpisodeView view(ep);
  Response resp;
  resp.mode = mode;
  PolicyState st;
  st.kind = ep.question.kind;

  auto pick = [&](std::vector<double> logits) -> size_t {
    if (temperature == 0.0) {
      size_t i = argmax_index(logits);
      resp.step_logprobs.push_back(0.0);
      return i;
    }
    if (temperature != 1.0)
      for (double& v : logits) v /= temperature;
    softmax_inplace(logits);
    size_t i = sample_from(logits, rng);
    resp.step_logprobs.push_back(std::log(logits[i]));
    return i;
  };

  for (uint32_t t = 0; t < trace_len; ++t) {
    size_t tok = pick(step_logits(params, view, st));
    resp.trace.push_back(static_cast<env::TraceToken>(tok));
    advance_state(view, st, static_cast<env::TraceToken>(tok));
  }

  bool g = effective_grounding(mode, st);
  size_t rel = pick(answer_logits_rel(params, st.kind, g));
  resp.answer = answer_of_rel(ep, static_cast<uint32_t>(rel));

  resp.total_logprob = 0.0;
  for (double lp : resp.step_logprobs) resp.total_logprob += lp;
  return resp;
}

namespace {

// Shared replay skeleton for logprob and its gradient.
template <typename StepFn, typename AnswerFn>
void replay(const PolicyParams& params, const env::Episode& ep, const Response& resp,
            StepFn&& on_step, AnswerFn&& on_answer) {
  check_compatible(params, ep);
  if (resp.mode == Mode::direct && !resp.trace.empty())
    throw InputError("direct-mode response carries a nonempty trace");
  if (resp.trace.size() > kMaxTraceLen)
    throw InputError("trace length " + std::to_string(resp.trace.size()) +
                     " exceeds maximum " + std::to_string(kMaxTraceLen));
  if (resp.answer < 1 || resp.answer > ep.n_options)
    throw InputError("answer index out of range: " + std::to_string(resp.answer));

  EpisodeView view(ep);
  PolicyState st;
  st.kind = ep.question.kind;
  for (env::TraceToken tok : resp.trace) {
    if (tok >= ep.n_trace_tokens())
      throw InputError("trace token " + std::to_string(tok) + " outside vocabulary of " +
                       std::to_string(ep.n_trace_tokens()));
    on_step(view, st, tok);
    advance_state(view, st, tok);
  }
  bool g = effective_grounding(resp.mode, st);
  on_answer(st.kind, g, rel_of_answer(ep, resp.answer));
}

}  // namespace

double logprob(const PolicyParams& params, const env::Episode& ep, const Response& resp) {
  double total = 0.0;
  replay(
      params, ep, resp,
      [&](const EpisodeView& view, const PolicyState& st, env::TraceToken tok) {
        auto z = step_logits(params, view, st);
        softmax_inplace(z);
        total += std::log(z[tok]);
      },
      [&](env::QuestionKind kind, bool g, uint32_t rel) {
        auto z = answer_logits_rel(params, kind, g);
        softmax_inplace(z);
        total += std::log(z[rel]);
      });
  return total;
}

Gradient::Gradient(const PolicyParams& shape)
    : answer_table(shape.answer_table.size(), 0.0) {}

void Gradient::add_scaled(const Gradient& other, double s) {
  for (int r = 0; r < kNumLangRows; ++r)
    for (int c = 0; c < kNumLangClasses; ++c) lang_table[r][c] += s * other.lang_table[r][c];
  for (int r = 0; r < kNumKinds; ++r)
    for (int c = 0; c < kNumVisClasses; ++c) vis_table[r][c] += s * other.vis_table[r][c];
  for (size_t i = 0; i < answer_table.size(); ++i) answer_table[i] += s * other.answer_table[i];
  w_lang += s * other.w_lang;
  w_vis += s * other.w_vis;
}

void Gradient::scale(double s) {
  for (auto& row : lang_table)
    for (double& v : row) v *= s;
  for (auto& row : vis_table)
    for (double& v : row) v *= s;
  for (double& v : answer_table) v *= s;
  w_lang *= s;
  w_vis *= s;
}

double Gradient::max_abs() const {
  double m = std::max(std::abs(w_lang), std::abs(w_vis));
  for (const auto& row : lang_table)
    for (double v : row) m = std::max(m, std::abs(v));
  for (const auto& row : vis_table)
    for (double v : row) m = std::max(m, std::abs(v));
  for (double v : answer_table) m = std::max(m, std::abs(v));
  return m;
}

void scatter_step_coeffs(const PolicyParams& params, const EpisodeView& view,
                         const PolicyState& st, std::span<const double> coeff,
                         Gradient& out) {
  int row = lang_row(st);
  int kind = st.kind == env::QuestionKind::slot ? 0 : 1;
  double lam = dilution_lambda(params.dilution_kappa, st.t);

  double lang_sum[kNumLangClasses] = {};
  double vis_sum[kNumVisClasses] = {};
  for (size_t tok = 0; tok < coeff.size(); ++tok) {
    lang_sum[static_cast<int>(view.lang_class[tok])] += coeff[tok];
    vis_sum[static_cast<int>(view.vis_class[tok])] += coeff[tok];
  }
  for (int c = 0; c < kNumLangClasses; ++c) {
    out.lang_table[row][c] += params.w_lang * lang_sum[c];
    out.w_lang += lang_sum[c] * params.lang_table[row][c];
  }
  for (int c = 0; c < kNumVisClasses; ++c) {
    out.vis_table[kind][c] += lam * params.w_vis * vis_sum[c];
    out.w_vis += lam * vis_sum[c] * params.vis_table[kind][c];
  }
}

void scatter_answer_coeffs(const PolicyParams& params, env::QuestionKind kind, bool grounded,
                           std::span<const double> coeff, Gradient& out) {
  for (uint32_t rel = 0; rel < params.n_options; ++rel)
    out.answer_table[params.answer_index(grounded ? 1 : 0, kind, rel)] += coeff[rel];
}

void accumulate_logprob_grad(const PolicyParams& params, const env::Episode& ep,
                             const Response& resp, double c, Gradient& out) {
  replay(
      params, ep, resp,
      [&](const EpisodeView& view, const PolicyState& st, env::TraceToken tok) {
        auto p = step_logits(params, view, st);
        softmax_inplace(p);
        std::vector<double> coeff(p.size());
        for (size_t i = 0; i < p.size(); ++i) coeff[i] = c * ((i == tok ? 1.0 : 0.0) - p[i]);
        scatter_step_coeffs(params, view, st, coeff, out);
      },
      [&](env::QuestionKind kind, bool g, uint32_t rel) {
        auto p = answer_logits_rel(params, kind, g);
        softmax_inplace(p);
        std::vector<double> coeff(p.size());
        for (size_t i = 0; i < p.size(); ++i) coeff[i] = c * ((i == rel ? 1.0 : 0.0) - p[i]);
        scatter_answer_coeffs(params, kind, g, coeff, out);
      });
}

Gradient logprob_grad(const PolicyParams& params, const env::Episode& ep,
                      const Response& resp) {
  Gradient g(params);
  accumulate_logprob_grad(params, ep, resp, 1.0, g);
  return g;
}

VisitedStates visited_states(const env::Episode& ep, const Response& resp) {
  VisitedStates out;
  out.kind = ep.question.kind;
  EpisodeView view(ep);
  PolicyState st;
  st.kind = ep.question.kind;
  for (env::TraceToken tok : resp.trace) {
    if (tok >= ep.n_trace_tokens())
      throw InputError("trace token " + std::to_string(tok) + " outside vocabulary of " +
                       std::to_string(ep.n_trace_tokens()));
    out.steps.push_back(st);
    advance_state(view, st, tok);
  }
  out.answer_grounded = effective_grounding(resp.mode, st);
  return out;
}

PolicyParams reference_snapshot(const PolicyParams& params) { return params; }

namespace {
constexpr size_t kLangCount = static_cast<size_t>(kNumLangRows) * kNumLangClasses;
constexpr size_t kVisCount = static_cast<size_t>(kNumKinds) * kNumVisClasses;
}  // namespace

size_t num_learnable(const PolicyParams& params) {
  return kLangCount + kVisCount + params.answer_table.size() + 2;
}

double get_flat(const PolicyParams& params, size_t i) {
  if (i < kLangCount) return params.lang_table[i / kNumLangClasses][i % kNumLangClasses];
  i -= kLangCount;
  if (i < kVisCount) return params.vis_table[i / kNumVisClasses][i % kNumVisClasses];
  i -= kVisCount;
  if (i < params.answer_table.size()) return params.answer_table[i];
  i -= params.answer_table.size();
  return i == 0 ? params.w_lang : params.w_vis;
}

void set_flat(PolicyParams& params, size_t i, double v) {
  if (i < kLangCount) {
    params.lang_table[i / kNumLangClasses][i % kNumLangClasses] = v;
    return;
  }
  i -= kLangCount;
  if (i < kVisCount) {
    params.vis_table[i / kNumVisClasses][i % kNumVisClasses] = v;
    return;
  }
  i -= kVisCount;
  if (i < params.answer_table.size()) {
    params.answer_table[i] = v;
    return;
  }
  i -= params.answer_table.size();
  if (i == 0) params.w_lang = v;
  else params.w_vis = v;
}

double grad_flat(const Gradient& g, size_t i) {
  if (i < kLangCount) return g.lang_table[i / kNumLangClasses][i % kNumLangClasses];
  i -= kLangCount;
  if (i < kVisCount) return g.vis_table[i / kNumVisClasses][i % kNumVisClasses];
  i -= kVisCount;
  if (i < g.answer_table.size()) return g.answer_table[i];
  i -= g.answer_table.size();
  return i == 0 ? g.w_lang : g.w_vis;
}

void apply_ascent(PolicyParams& params, const Gradient& g, double learning_rate) {
  for (int r = 0; r < kNumLangRows; ++r)
    for (int c = 0; c < kNumLangClasses; ++c)
      params.lang_table[r][c] += learning_rate * g.lang_table[r][c];
  for (int r = 0; r < kNumKinds; ++r)
    for (int c = 0; c < kNumVisClasses; ++c)
      params.vis_table[r][c] += learning_rate * g.vis_table[r][c];
  for (size_t i = 0; i < params.answer_table.size(); ++i)
    params.answer_table[i] += learning_rate * g.answer_table[i];
  params.w_lang = std::max(0.0, params.w_lang + learning_rate * g.w_lang);
  params.w_vis = std::max(0.0, params.w_vis + learning_rate * g.w_vis);
}

}  // namespace ver::policy
