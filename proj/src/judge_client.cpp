#include "ver/judge_client.hpp"

#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace ver::judge {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

void validate(const JudgeClientConfig& cfg) {
  if (cfg.timeout_ms <= 0) throw ConfigError("judge timeout_ms must be > 0");
  if (cfg.max_in_flight < 1) throw ConfigError("judge max_in_flight must be >= 1");
  if (cfg.retries < 0) throw ConfigError("judge retries must be >= 0");
  if (cfg.endpoint.rfind("http://", 0) != 0)
    throw ConfigError("judge endpoint must be an http:// URL, got " + cfg.endpoint);
}

namespace {

std::string request_body(const std::string& question, const std::string& trace,
                         const std::vector<std::string>& evidence) {
  json body;
  body["question"] = question;
  body["trace"] = trace;
  body["evidence"] = evidence;
  return body.dump();
}

int parse_reply(const std::string& body) {
  json reply;
  try {
    reply = json::parse(body);
  } catch (const json::parse_error& e) {
    throw MalformedReplyError(std::string("judge reply is not JSON: ") + e.what());
  }
  if (!reply.is_object() || !reply.contains("grounded"))
    throw MalformedReplyError("judge reply missing \"grounded\": " + body);
  const json& g = reply["grounded"];
  if (!g.is_number_integer())
    throw MalformedReplyError("judge reply \"grounded\" is not an integer: " + body);
  int e = g.get<int>();
  if (e != 0 && e != 1)
    throw MalformedReplyError("judge reply \"grounded\" must be 0 or 1, got " +
                              std::to_string(e));
  return e;
}

// Simple in-process concurrency cap shared by all clients of one endpoint.
class InFlightSlot {
public:
  InFlightSlot(std::mutex& m, std::condition_variable& cv, int& free) : m_(m), cv_(cv), free_(free) {
    std::unique_lock<std::mutex> lock(m_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
  }
  ~InFlightSlot() {
    {
      std::lock_guard<std::mutex> lock(m_);
      ++free_;
    }
    cv_.notify_one();
  }

private:
  std::mutex& m_;
  std::condition_variable& cv_;
  int& free_;
};

struct InFlightGate {
  std::mutex m;
  std::condition_variable cv;
  int free;
  explicit InFlightGate(int n) : free(n) {}
};

InFlightGate& gate_for(const JudgeClientConfig& cfg) {
  static std::mutex registry_mutex;
  static std::map<std::string, std::unique_ptr<InFlightGate>> registry;
  std::lock_guard<std::mutex> lock(registry_mutex);
  auto it = registry.find(cfg.endpoint);
  if (it == registry.end())
    it = registry.emplace(cfg.endpoint, std::make_unique<InFlightGate>(cfg.max_in_flight)).first;
  return *it->second;
}

}  // namespace

Verdict remote_judge(const JudgeClientConfig& cfg, const std::string& question_text,
                     const std::string& trace_text,
                     const std::vector<std::string>& evidence_lines) {
  validate(cfg);
  InFlightGate& gate = gate_for(cfg);
  InFlightSlot slot(gate.m, gate.cv, gate.free);

  const std::string body = request_body(question_text, trace_text, evidence_lines);
  const int attempts = cfg.retries + 1;
  const auto started = Clock::now();
  std::string last_error;

  for (int attempt = 0; attempt < attempts; ++attempt) {
    httplib::Client client(cfg.endpoint);
    client.set_connection_timeout(0, cfg.timeout_ms * 1000);
    client.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    client.set_write_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);

    auto attempt_start = Clock::now();
    auto res = client.Post("/judge", body, "application/json");
    auto elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
        Clock::now() - attempt_start);

    if (res && res->status == 200) {
      Verdict v;
      v.e = parse_reply(res->body);  // may throw MalformedReplyError, not retried
      v.source = Source::remote;
      v.latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started);
      return v;
    }

    if (res) {
      last_error = "HTTP status " + std::to_string(res->status);
    } else if (res.error() == httplib::Error::ConnectionTimeout ||
               elapsed_ms.count() >= cfg.timeout_ms) {
      last_error = "timed out after " + std::to_string(elapsed_ms.count()) + " ms";
      if (attempt + 1 == attempts)
        throw TimeoutError("judge request to " + cfg.endpoint + " " + last_error + " (" +
                           std::to_string(attempts) + " attempts)");
      continue;
    } else {
      last_error = httplib::to_string(res.error());
    }
  }
  throw TransportError("judge request to " + cfg.endpoint + " failed after " +
                       std::to_string(attempts) + " attempts: " + last_error);
}

// ---------------------------------------------------------------------------
// Stub server

struct StubJudgeServer::Impl {
  httplib::Server server;
  Handler handler;
  std::mutex handler_mutex;
};

StubJudgeServer::StubJudgeServer() : impl_(std::make_unique<Impl>()) {
  impl_->handler = &StubJudgeServer::containment_rule;
}

StubJudgeServer::~StubJudgeServer() { stop(); }

int StubJudgeServer::containment_rule(const std::string& /*question*/,
                                      const std::string& trace,
                                      const std::vector<std::string>& evidence) {
  std::istringstream toks(trace);
  std::string tok;
  while (toks >> tok) {
    for (const std::string& ev : evidence)
      if (tok == ev) return 1;
  }
  return 0;
}

void StubJudgeServer::set_handler(Handler h) {
  std::lock_guard<std::mutex> lock(impl_->handler_mutex);
  impl_->handler = std::move(h);
}

int StubJudgeServer::start(const std::string& host, int port) {
  host_ = host;
  impl_->server.Post("/judge", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error&) {
      res.status = 400;
      res.set_content("{\"error\":\"invalid JSON\"}", "application/json");
      return;
    }
    if (!body.is_object() || !body.contains("question") || !body.contains("trace") ||
        !body.contains("evidence") || !body["question"].is_string() ||
        !body["trace"].is_string() || !body["evidence"].is_array()) {
      res.status = 400;
      res.set_content("{\"error\":\"expected {question, trace, evidence}\"}",
                      "application/json");
      return;
    }
    std::vector<std::string> evidence;
    for (const auto& item : body["evidence"]) {
      if (!item.is_string()) {
        res.status = 400;
        res.set_content("{\"error\":\"evidence must be strings\"}", "application/json");
        return;
      }
      evidence.push_back(item.get<std::string>());
    }
    Handler h;
    {
      std::lock_guard<std::mutex> lock(impl_->handler_mutex);
      h = impl_->handler;
    }
    int grounded = h(body["question"].get<std::string>(), body["trace"].get<std::string>(),
                     evidence);
    served_.fetch_add(1);
    json reply;
    reply["grounded"] = grounded;
    res.set_content(reply.dump(), "application/json");
  });

  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    if (port_ < 0) throw IoError("judge stub could not bind to any port on " + host);
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  } else {
    port_ = port;
    if (!impl_->server.bind_to_port(host, port))
      throw IoError("judge stub could not bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  }
  impl_->server.wait_until_ready();
  return port_;
}

void StubJudgeServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

void StubJudgeServer::request_stop() {
  if (impl_) impl_->server.stop();
}

bool StubJudgeServer::running() const { return impl_ && impl_->server.is_running(); }

std::string StubJudgeServer::endpoint() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace ver::judge
