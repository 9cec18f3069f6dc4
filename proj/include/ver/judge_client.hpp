#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "ver/errors.hpp"
#include "ver/judge.hpp"

namespace ver::judge {

class JudgeError : public Error {
public:
  explicit JudgeError(const std::string& msg) : Error(msg) {}
};

// Endpoint did not answer within the configured timeout.
class TimeoutError : public JudgeError {
public:
  explicit TimeoutError(const std::string& msg) : JudgeError(msg) {}
};

// Endpoint answered but outside the {"grounded": 0|1} schema.
class MalformedReplyError : public JudgeError {
public:
  explicit MalformedReplyError(const std::string& msg) : JudgeError(msg) {}
};

// Connection failed, or retries were exhausted. Never turned into a verdict.
class TransportError : public JudgeError {
public:
  explicit TransportError(const std::string& msg) : JudgeError(msg) {}
};

enum class ErrorPolicy { fail_run, treat_as_zero };

struct JudgeClientConfig {
  std::string endpoint = "http://127.0.0.1:8791";
  int timeout_ms = 5000;
  int max_in_flight = 4;
  int retries = 2;  // additional attempts after the first
  // Decode temperature of the judge deployment; recorded for provenance, not
  // sent on the wire (the request schema is fixed).
  double temperature = 0.0;
  ErrorPolicy error_policy = ErrorPolicy::fail_run;
};

void validate(const JudgeClientConfig& cfg);

// POSTs {"question","trace","evidence"} to <endpoint>/judge and parses a
// strict {"grounded": 0|1} reply. Transport failures are retried per config;
// malformed replies are protocol violations and surface immediately.
Verdict remote_judge(const JudgeClientConfig& cfg, const std::string& question_text,
                     const std::string& trace_text,
                     const std::vector<std::string>& evidence_lines);

// In-process test double implementing the wire schema. Default rule:
// grounded = 1 iff any evidence line occurs as a whole token of the trace
// text. It sees only the request body, so it cannot reproduce the rule
// judge's hallucination-precedence clause; it exists to exercise transport
// and schema handling.
class StubJudgeServer {
public:
  using Handler = std::function<int(const std::string& question, const std::string& trace,
                                    const std::vector<std::string>& evidence)>;

  StubJudgeServer();
  ~StubJudgeServer();
  StubJudgeServer(const StubJudgeServer&) = delete;
  StubJudgeServer& operator=(const StubJudgeServer&) = delete;

  // Binds to the requested port (0 picks a free one) and serves until stop().
  // Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  // Async-signal-safe stop request; pair with stop() for the join.
  void request_stop();
  bool running() const;
  int port() const { return port_; }
  std::string endpoint() const;
  uint64_t requests_served() const { return served_.load(); }

  // Replaces the containment rule, e.g. to reply with out-of-schema bodies in
  // tests (return values outside {0,1} are sent through as-is).
  void set_handler(Handler h);

  static int containment_rule(const std::string& question, const std::string& trace,
                              const std::vector<std::string>& evidence);

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::atomic<uint64_t> served_{0};
  int port_ = 0;
  std::string host_;
};

}  // namespace ver::judge
