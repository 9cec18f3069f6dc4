#include "ver/judge.hpp"

#include <algorithm>

#include "ver/errors.hpp"

namespace ver::judge {

Verdict rule_judge(const policy::Response& resp, const env::EvidenceList& ev,
                   const env::Episode& ep) {
  if (ev.fact_ids.empty()) throw InputError("rule_judge requires nonempty evidence");

  auto cited = [&](env::TraceToken tok) {
    return ep.is_fact_token(tok) &&
           std::find(ev.fact_ids.begin(), ev.fact_ids.end(), tok) != ev.fact_ids.end();
  };

  Verdict v;
  v.source = Source::rule;
  for (env::TraceToken tok : resp.trace) {
    if (cited(tok)) {
      v.e = 1;
      return v;
    }
    if (ep.is_fact_token(tok) && !ep.fact_in_video(tok)) {
      v.e = 0;  // hallucination precedes any citation
      return v;
    }
  }
  v.e = 0;  // no citation at all
  return v;
}

std::string render_judge_prompt(const std::string& question_text,
                                const std::string& trace_text,
                                const std::string& evidence_text) {
  if (question_text.empty()) throw InputError("judge prompt requires nonempty question text");
  if (trace_text.empty()) throw InputError("judge prompt requires nonempty trace text");
  if (evidence_text.empty()) throw InputError("judge prompt requires nonempty evidence text");

  std::string out;
  out += "You are grading whether a reasoning trace references the listed visual evidence.\n";
  out += "Question:\n";
  out += question_text;
  out += "\nReasoning trace:\n";
  out += trace_text;
  out += "\nVisual evidence:\n";
  out += evidence_text;
  out += "\nReply with exactly one digit: 1 if the trace references the visual evidence "
         "before introducing any unsupported visual fact, otherwise 0.\n";
  return out;
}

}  // namespace ver::judge
