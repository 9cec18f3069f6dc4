#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "ver/env.hpp"
#include "ver/policy.hpp"

namespace ver::judge {

enum class Source { rule, remote };

struct Verdict {
  int e = 0;  // binary grounding score
  Source source = Source::rule;
  std::chrono::milliseconds latency{0};  // remote only
};

// Deterministic grounding verdict: e = 1 iff the trace cites at least one
// evidence fact and no absent-from-video fact appears before the first such
// citation. The precedence clause is what lets this judge penalize chains
// that drifted before ever touching the evidence.
Verdict rule_judge(const policy::Response& resp, const env::EvidenceList& ev,
                   const env::Episode& ep);

// Fixed template embedding the three texts verbatim; byte-stable for
// identical inputs. Empty question/trace/evidence text raises InputError.
std::string render_judge_prompt(const std::string& question_text,
                                const std::string& trace_text,
                                const std::string& evidence_text);

}  // namespace ver::judge
