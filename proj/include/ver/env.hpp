#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ver/errors.hpp"

namespace ver::env {

using FactId = uint32_t;
// Trace tokens: ids [0, fact_vocab_size) are fact tokens, the next
// filler_vocab_size ids are filler tokens.
using TraceToken = uint32_t;

enum class QuestionKind { slot, presence };

const char* to_string(QuestionKind k);
QuestionKind question_kind_from_string(const std::string& s);

struct EnvConfig {
  uint32_t n_facts_per_video = 4;
  uint32_t fact_vocab_size = 24;
  uint32_t filler_vocab_size = 8;
  uint32_t n_options = 4;
  std::vector<QuestionKind> question_kinds = {QuestionKind::slot, QuestionKind::presence};
  uint64_t seed = 0;

  uint32_t n_trace_tokens() const { return fact_vocab_size + filler_vocab_size; }
};

// Throws ConfigError naming the violated bound.
void validate(const EnvConfig& cfg);

struct Question {
  QuestionKind kind = QuestionKind::slot;
  // slot questions: 1-based position into Episode::facts.
  uint32_t target_slot = 0;
  // presence questions: the fact asked about.
  FactId target_fact = 0;
  std::vector<FactId> options;  // n_options distinct fact ids
  std::string text;
};

struct Episode {
  uint64_t index = 0;
  std::vector<FactId> facts;  // the ordered "video"
  Question question;
  uint32_t truth = 0;  // 1-based index into question.options

  // Vocabulary dimensions copied from the generating config so an Episode is
  // self-contained.
  uint32_t fact_vocab_size = 0;
  uint32_t filler_vocab_size = 0;
  uint32_t n_options = 0;

  uint32_t n_trace_tokens() const { return fact_vocab_size + filler_vocab_size; }
  bool is_fact_token(TraceToken t) const { return t < fact_vocab_size; }
  bool fact_in_video(FactId f) const;
  // The single fact that justifies the ground-truth answer.
  FactId required_fact() const;
};

enum class EvidenceMode { QD, VC };

const char* to_string(EvidenceMode m);
EvidenceMode evidence_mode_from_string(const std::string& s);

struct EvidenceList {
  EvidenceMode mode = EvidenceMode::QD;
  std::vector<FactId> fact_ids;     // ascending, no duplicates
  std::vector<std::string> lines;   // one text line per fact
};

Episode gen_episode(const EnvConfig& cfg, uint64_t index);

// True iff answer names the ground-truth option. answer is 1-based;
// out-of-range values raise InputError.
bool check_answer(const Episode& ep, uint32_t answer);

EvidenceList gen_evidence(const Episode& ep, EvidenceMode mode);

// Every fact-vocabulary id absent from ep.facts.
std::vector<FactId> hallucination_candidates(const Episode& ep);

// Text renderings. Stable byte-for-byte for identical inputs.
std::string token_text(const Episode& ep, TraceToken t);
std::string trace_text(const Episode& ep, const std::vector<TraceToken>& trace);
std::string fact_text(FactId f);

// Stable-field-order JSON used by corpus export and tests.
std::string episode_to_json(const Episode& ep);
std::string evidence_to_json(const EvidenceList& ev);

// FNV-1a over the canonical field serialization; embedded in checkpoints to
// reject mismatched loads.
uint64_t config_hash(const EnvConfig& cfg);

}  // namespace ver::env
