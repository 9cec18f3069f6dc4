#include "ver/env.hpp"

#include <algorithm>
#include <sstream>

#include "ver/rng.hpp"

namespace ver::env {

const char* to_string(QuestionKind k) {
  return k == QuestionKind::slot ? "slot" : "presence";
}

QuestionKind question_kind_from_string(const std::string& s) {
  if (s == "slot") return QuestionKind::slot;
  if (s == "presence") return QuestionKind::presence;
  throw ConfigError("unknown question kind: " + s);
}

const char* to_string(EvidenceMode m) { return m == EvidenceMode::QD ? "qd" : "vc"; }

EvidenceMode evidence_mode_from_string(const std::string& s) {
  if (s == "qd" || s == "QD") return EvidenceMode::QD;
  if (s == "vc" || s == "VC") return EvidenceMode::VC;
  throw ConfigError("unknown evidence mode: " + s);
}

void validate(const EnvConfig& cfg) {
  if (cfg.n_facts_per_video < 1)
    throw ConfigError("n_facts_per_video must be >= 1, got " +
                      std::to_string(cfg.n_facts_per_video));
  if (cfg.n_options < 2)
    throw ConfigError("n_options must be >= 2, got " + std::to_string(cfg.n_options));
  if (cfg.fact_vocab_size < cfg.n_facts_per_video + cfg.n_options)
    throw ConfigError(
        "fact_vocab_size must be >= n_facts_per_video + n_options "
        "(distractors must exist): " +
        std::to_string(cfg.fact_vocab_size) + " < " +
        std::to_string(cfg.n_facts_per_video + cfg.n_options));
  if (cfg.filler_vocab_size < 1)
    throw ConfigError("filler_vocab_size must be >= 1, got " +
                      std::to_string(cfg.filler_vocab_size));
  if (cfg.question_kinds.empty())
    throw ConfigError("question_kinds must not be empty");
}

bool Episode::fact_in_video(FactId f) const {
  return std::find(facts.begin(), facts.end(), f) != facts.end();
}

FactId Episode::required_fact() const {
  if (question.kind == QuestionKind::slot) return facts[question.target_slot - 1];
  return question.target_fact;
}

std::string fact_text(FactId f) { return "fact_" + std::to_string(f); }

std::string token_text(const Episode& ep, TraceToken t) {
  if (t < ep.fact_vocab_size) return fact_text(t);
  return "filler_" + std::to_string(t - ep.fact_vocab_size);
}

std::string trace_text(const Episode& ep, const std::vector<TraceToken>& trace) {
  std::string out;
  for (size_t i = 0; i < trace.size(); ++i) {
    if (i) out += ' ';
    out += token_text(ep, trace[i]);
  }
  return out;
}

namespace {

std::string render_options(const std::vector<FactId>& options) {
  std::string out;
  for (size_t i = 0; i < options.size(); ++i) {
    out += ' ';
    out += std::to_string(i + 1);
    out += ") ";
    out += fact_text(options[i]);
  }
  return out;
}

std::string ordinal(uint32_t n) {
  uint32_t mod100 = n % 100;
  uint32_t mod10 = n % 10;
  const char* suffix = "th";
  if (mod100 < 11 || mod100 > 13) {
    if (mod10 == 1) suffix = "st";
    else if (mod10 == 2) suffix = "nd";
    else if (mod10 == 3) suffix = "rd";
  }
  return std::to_string(n) + suffix;
}

std::string render_question(const Question& q) {
  if (q.kind == QuestionKind::slot) {
    return "What was the " + ordinal(q.target_slot) +
           " event in the video? Options:" + render_options(q.options);
  }
  return "Which of these events appeared in the video? Options:" +
         render_options(q.options);
}

}  // namespace

Episode gen_episode(const EnvConfig& cfg, uint64_t index) {
  validate(cfg);
  rng::Rng r(rng::derive_stream(cfg.seed, index));

  Episode ep;
  ep.index = index;
  ep.fact_vocab_size = cfg.fact_vocab_size;
  ep.filler_vocab_size = cfg.filler_vocab_size;
  ep.n_options = cfg.n_options;

  auto drawn = r.sample_distinct(cfg.fact_vocab_size, cfg.n_facts_per_video);
  ep.facts.assign(drawn.begin(), drawn.end());

  Question& q = ep.question;
  q.kind = cfg.question_kinds[r.next_below(cfg.question_kinds.size())];

  FactId truth_fact;
  std::vector<FactId> distractor_pool;
  if (q.kind == QuestionKind::slot) {
    q.target_slot = static_cast<uint32_t>(1 + r.next_below(cfg.n_facts_per_video));
    truth_fact = ep.facts[q.target_slot - 1];
    // Any fact except the one at the queried slot is a valid distractor,
    // including other in-video facts.
    for (FactId f = 0; f < cfg.fact_vocab_size; ++f)
      if (f != truth_fact) distractor_pool.push_back(f);
  } else {
    q.target_fact = ep.facts[r.next_below(cfg.n_facts_per_video)];
    truth_fact = q.target_fact;
    // Presence distractors must be absent from the video, otherwise more than
    // one option would be correct.
    for (FactId f = 0; f < cfg.fact_vocab_size; ++f)
      if (!ep.fact_in_video(f)) distractor_pool.push_back(f);
  }

  uint32_t n_distractors = cfg.n_options - 1;
  auto picks = r.sample_distinct(distractor_pool.size(), n_distractors);
  q.options.assign(cfg.n_options, 0);
  uint32_t truth_pos = static_cast<uint32_t>(r.next_below(cfg.n_options));
  uint32_t next_pick = 0;
  for (uint32_t i = 0; i < cfg.n_options; ++i) {
    if (i == truth_pos) q.options[i] = truth_fact;
    else q.options[i] = distractor_pool[picks[next_pick++]];
  }
  ep.truth = truth_pos + 1;
  q.text = render_question(q);
  return ep;
}

bool check_answer(const Episode& ep, uint32_t answer) {
  if (answer < 1 || answer > ep.n_options)
    throw InputError("answer index out of range [1," + std::to_string(ep.n_options) +
                     "]: " + std::to_string(answer));
  return answer == ep.truth;
}

EvidenceList gen_evidence(const Episode& ep, EvidenceMode mode) {
  EvidenceList ev;
  ev.mode = mode;
  if (mode == EvidenceMode::QD) {
    ev.fact_ids = {ep.required_fact()};
  } else {
    ev.fact_ids = ep.facts;
    std::sort(ev.fact_ids.begin(), ev.fact_ids.end());
  }
  for (FactId f : ev.fact_ids) ev.lines.push_back(fact_text(f));
  return ev;
}

std::vector<FactId> hallucination_candidates(const Episode& ep) {
  std::vector<FactId> out;
  for (FactId f = 0; f < ep.fact_vocab_size; ++f)
    if (!ep.fact_in_video(f)) out.push_back(f);
  return out;
}

namespace {

void append_json_string(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  out += '"';
}

template <typename T>
void append_json_array(std::string& out, const std::vector<T>& v) {
  out += '[';
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  out += ']';
}

}  // namespace

std::string episode_to_json(const Episode& ep) {
  std::string out = "{\"index\":" + std::to_string(ep.index) + ",\"facts\":";
  append_json_array(out, ep.facts);
  out += ",\"question\":{\"kind\":\"";
  out += to_string(ep.question.kind);
  out += '"';
  if (ep.question.kind == QuestionKind::slot)
    out += ",\"target_slot\":" + std::to_string(ep.question.target_slot);
  else
    out += ",\"target_fact\":" + std::to_string(ep.question.target_fact);
  out += ",\"options\":";
  append_json_array(out, ep.question.options);
  out += ",\"text\":";
  append_json_string(out, ep.question.text);
  out += "},\"truth\":" + std::to_string(ep.truth);
  out += ",\"fact_vocab_size\":" + std::to_string(ep.fact_vocab_size);
  out += ",\"filler_vocab_size\":" + std::to_string(ep.filler_vocab_size);
  out += ",\"n_options\":" + std::to_string(ep.n_options);
  out += '}';
  return out;
}

std::string evidence_to_json(const EvidenceList& ev) {
  std::string out = "{\"mode\":\"";
  out += to_string(ev.mode);
  out += "\",\"fact_ids\":";
  append_json_array(out, ev.fact_ids);
  out += ",\"lines\":[";
  for (size_t i = 0; i < ev.lines.size(); ++i) {
    if (i) out += ',';
    append_json_string(out, ev.lines[i]);
  }
  out += "]}";
  return out;
}

uint64_t config_hash(const EnvConfig& cfg) {
  std::string canon = std::to_string(cfg.n_facts_per_video) + '|' +
                      std::to_string(cfg.fact_vocab_size) + '|' +
                      std::to_string(cfg.filler_vocab_size) + '|' +
                      std::to_string(cfg.n_options) + '|';
  for (auto k : cfg.question_kinds) {
    canon += to_string(k);
    canon += ',';
  }
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ver::env
