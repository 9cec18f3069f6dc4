#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ver/env.hpp"
#include "ver/rng.hpp"

namespace ver::policy {

inline constexpr uint32_t kMaxTraceLen = 64;

enum class Mode { direct, cot };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

// Class of the previously emitted trace token, the coarse chain summary the
// step distribution conditions on.
enum class LastClass : int { start = 0, filler = 1, video_fact = 2, absent_fact = 3 };
inline constexpr int kNumLastClasses = 4;

// Language-channel token classes. The language prior is blind to the episode:
// it can tell fact-shaped tokens from fillers but not whether a fact is in
// the video.
enum class LangClass : int { fact = 0, filler = 1 };
inline constexpr int kNumLangClasses = 2;

// Visual-channel token classes, relative to the episode. This channel is what
// distinguishes grounded citations from hallucinations.
enum class VisClass : int { evidence_fact = 0, video_fact = 1, absent_fact = 2, filler = 3 };
inline constexpr int kNumVisClasses = 4;

inline constexpr int kNumKinds = 2;        // slot, presence
inline constexpr int kNumLangRows = kNumLastClasses * kNumKinds * 2;

struct PolicyState {
  uint32_t t = 1;  // 1-based step index
  LastClass last = LastClass::start;
  env::QuestionKind kind = env::QuestionKind::slot;
  bool cited_required = false;  // required evidence fact emitted
  bool hallucinated = false;    // absent fact emitted before the required one
};

int lang_row(const PolicyState& st);

// Dilution schedule: weight of the visual channel at step t.
double dilution_lambda(double kappa, uint32_t t);

// Tabular parameters for both generation channels and the answer head.
//
// The answer head is indexed by (grounding bit, question kind, option index)
// where the option axis is in truth-relative order: index 0 is the correct
// option, indices 1.. are the distractors in option-list order. The grounding
// bit gates how much of that signal the head can use, which is what lets a
// drifted chain corrupt an otherwise correct answer.
struct PolicyParams {
  std::array<std::array<double, kNumLangClasses>, kNumLangRows> lang_table{};
  std::array<std::array<double, kNumVisClasses>, kNumKinds> vis_table{};
  std::vector<double> answer_table;  // [g][kind][rel_option], flattened
  uint32_t n_options = 0;
  double w_lang = 1.0;
  double w_vis = 0.3;
  double dilution_kappa = 0.25;

  double& answer_at(int g, env::QuestionKind kind, uint32_t rel);
  double answer_at(int g, env::QuestionKind kind, uint32_t rel) const;
  size_t answer_index(int g, env::QuestionKind kind, uint32_t rel) const;
};

struct InitConfig {
  double noise_scale = 0.0;
  double w_lang = 1.0;
  double w_vis = 0.3;
  double dilution_kappa = 0.25;
  uint64_t seed = 0;
};

PolicyParams init_params(const env::EnvConfig& env_cfg, const InitConfig& init_cfg);

// The untrained-but-drift-afflicted starting point used by the diagnostic
// experiments: the visual channel favors the question-relevant fact and
// suppresses absent facts early on, dilution erodes that with chain position,
// and the answer head is accurate only when the grounding bit survives.
PolicyParams calibrated_preset(const env::EnvConfig& env_cfg, const InitConfig& init_cfg);

struct Response {
  std::vector<env::TraceToken> trace;
  uint32_t answer = 0;  // 1-based option index
  std::vector<double> step_logprobs;  // one per sampled token, answer included
  double total_logprob = 0.0;
  Mode mode = Mode::cot;
};

// Per-episode token classification, precomputed once per episode so the
// samplers and gradient replays stay cheap.
struct EpisodeView {
  const env::Episode* ep = nullptr;
  env::FactId required = 0;
  std::vector<VisClass> vis_class;   // per trace token
  std::vector<LangClass> lang_class; // per trace token

  explicit EpisodeView(const env::Episode& e);
  LastClass classify_last(env::TraceToken t) const;
};

// Probability vector over all trace tokens at state st. Entries are strictly
// positive and sum to 1 within 1e-12.
std::vector<double> step_distribution(const PolicyParams& params, const env::Episode& ep,
                                      const PolicyState& st);

// Probability vector over answer options (literal option order).
std::vector<double> answer_distribution(const PolicyParams& params, const env::Episode& ep,
                                        bool grounded_effective);

// Same distribution in truth-relative coordinates (index 0 = correct option).
std::vector<double> answer_distribution_rel(const PolicyParams& params,
                                            env::QuestionKind kind, bool grounded);

// Advances grounding/hallucination bits and the last-token class; both bits
// are monotone.
void advance_state(const EpisodeView& view, PolicyState& st, env::TraceToken tok);

// The bit the answer head conditions on. The head always has the video in
// view; what destroys it is a chain that committed to a nonexistent fact
// before citing the evidence, after which the answer trusts the fiction.
// Direct answers carry no chain and cannot be corrupted.
bool effective_grounding(Mode mode, const PolicyState& st);

// temperature rescales logits at sampling time only (1.0 during training);
// temperature 0 takes the argmax, ties to the lowest token id. step_logprobs
// record the distribution actually sampled from.
Response sample_response(const PolicyParams& params, const env::Episode& ep, Mode mode,
                         uint32_t trace_len, rng::Rng& rng, double temperature = 1.0);

// Exact sequence log-probability under the untempered model, replaying the
// same state machine as sampling.
double logprob(const PolicyParams& params, const env::Episode& ep, const Response& resp);

// Gradient container mirroring PolicyParams' learnable entries.
struct Gradient {
  std::array<std::array<double, kNumLangClasses>, kNumLangRows> lang_table{};
  std::array<std::array<double, kNumVisClasses>, kNumKinds> vis_table{};
  std::vector<double> answer_table;
  double w_lang = 0.0;
  double w_vis = 0.0;

  explicit Gradient(const PolicyParams& shape);
  void add_scaled(const Gradient& other, double scale);
  void scale(double s);
  double max_abs() const;
};

Gradient logprob_grad(const PolicyParams& params, const env::Episode& ep,
                      const Response& resp);

// Adds coeff * logprob_grad without allocating a fresh Gradient.
void accumulate_logprob_grad(const PolicyParams& params, const env::Episode& ep,
                             const Response& resp, double coeff, Gradient& out);

// Low-level chain rule: given d(objective)/d(logit) per trace token at state
// st, scatters into the table/scale entries that produced those logits. Used
// by the log-probability gradient and the exact-KL gradient alike.
void scatter_step_coeffs(const PolicyParams& params, const EpisodeView& view,
                         const PolicyState& st, std::span<const double> coeff,
                         Gradient& out);
void scatter_answer_coeffs(const PolicyParams& params, env::QuestionKind kind, bool grounded,
                           std::span<const double> coeff, Gradient& out);

// The distribution-bearing states a response visits: one per trace step plus
// the answer state. Transitions depend only on the episode and the emitted
// tokens, never on parameters, so the visit list is policy-independent.
struct VisitedStates {
  std::vector<PolicyState> steps;
  env::QuestionKind kind = env::QuestionKind::slot;
  bool answer_grounded = false;
};

VisitedStates visited_states(const env::Episode& ep, const Response& resp);

// Deep immutable copy (value semantics make this a plain copy; the function
// exists to name the reference-model snapshot in the training loop).
PolicyParams reference_snapshot(const PolicyParams& params);

// Flat read/write access for finite-difference tests and checkpoints.
size_t num_learnable(const PolicyParams& params);
double get_flat(const PolicyParams& params, size_t i);
void set_flat(PolicyParams& params, size_t i, double v);
double grad_flat(const Gradient& g, size_t i);

// Gradient ascent step; channel scales are clamped at zero to preserve their
// nonnegativity invariant.
void apply_ascent(PolicyParams& params, const Gradient& g, double learning_rate);

}  // namespace ver::policy
