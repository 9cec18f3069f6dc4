#include "ver/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>
#include <vector>

#include "ver/errors.hpp"

namespace ver::harness {

PolicyInitKind policy_init_from_string(const std::string& s) {
  if (s == "zero") return PolicyInitKind::zero;
  if (s == "noise") return PolicyInitKind::noise;
  if (s == "calibrated") return PolicyInitKind::calibrated;
  throw ConfigError("unknown policy init kind: " + s);
}

namespace {

// Minimal TOML subset: one level of [section] headers, key = value lines,
// values are integers, floats, booleans, quoted strings, or flat arrays.
// Comments start at an unquoted '#'.

struct Value {
  enum class Kind { integer, real, boolean, string, array } kind;
  int64_t i = 0;
  double d = 0.0;
  bool b = false;
  std::string s;
  std::vector<Value> items;
  int line = 0;
};

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"') in_string = !in_string;
    else if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool parse_integer(const std::string& s, int64_t& out) {
  if (s.empty()) return false;
  size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
  if (i == s.size()) return false;
  for (size_t j = i; j < s.size(); ++j)
    if (!std::isdigit(static_cast<unsigned char>(s[j]))) return false;
  try {
    out = std::stoll(s);
  } catch (...) {
    return false;
  }
  return true;
}

Value parse_scalar(const std::string& raw, int line) {
  Value v;
  v.line = line;
  std::string s = strip(raw);
  if (s.empty()) throw ConfigError("line " + std::to_string(line) + ": empty value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"')
      throw ConfigError("line " + std::to_string(line) + ": unterminated string");
    v.kind = Value::Kind::string;
    std::string body = s.substr(1, s.size() - 2);
    std::string out;
    for (size_t i = 0; i < body.size(); ++i) {
      if (body[i] == '\\' && i + 1 < body.size()) {
        char c = body[++i];
        if (c == 'n') out += '\n';
        else if (c == 't') out += '\t';
        else out += c;
      } else {
        out += body[i];
      }
    }
    v.s = out;
    return v;
  }
  if (s == "true" || s == "false") {
    v.kind = Value::Kind::boolean;
    v.b = (s == "true");
    return v;
  }
  if (parse_integer(s, v.i)) {
    v.kind = Value::Kind::integer;
    v.d = static_cast<double>(v.i);
    return v;
  }
  try {
    size_t consumed = 0;
    double d = std::stod(s, &consumed);
    if (consumed == s.size()) {
      v.kind = Value::Kind::real;
      v.d = d;
      return v;
    }
  } catch (...) {
  }
  throw ConfigError("line " + std::to_string(line) + ": cannot parse value: " + s);
}

Value parse_value(const std::string& raw, int line) {
  std::string s = strip(raw);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']')
      throw ConfigError("line " + std::to_string(line) + ": unterminated array");
    Value v;
    v.kind = Value::Kind::array;
    v.line = line;
    std::string body = s.substr(1, s.size() - 2);
    std::string item;
    bool in_string = false;
    for (char c : body) {
      if (c == '"') in_string = !in_string;
      if (c == ',' && !in_string) {
        if (!strip(item).empty()) v.items.push_back(parse_scalar(item, line));
        item.clear();
      } else {
        item += c;
      }
    }
    if (!strip(item).empty()) v.items.push_back(parse_scalar(item, line));
    return v;
  }
  return parse_scalar(raw, line);
}

using Tree = std::map<std::string, std::map<std::string, Value>>;

Tree parse_tree(const std::string& text) {
  Tree tree;
  std::string section;  // "" = top level
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = strip(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = strip(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      tree[section];
      continue;
    }
    size_t eq = std::string::npos;
    bool in_string = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_string = !in_string;
      else if (line[i] == '=' && !in_string) {
        eq = i;
        break;
      }
    }
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = strip(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (tree[section].count(key))
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key: " + key);
    tree[section][key] = parse_value(line.substr(eq + 1), lineno);
  }
  return tree;
}

// Typed accessors; every consumed key is erased so leftovers can be rejected
// by name afterwards.
class Section {
public:
  Section(std::map<std::string, Value>& kv, std::string name)
      : kv_(kv), name_(std::move(name)) {}

  template <typename T>
  void get_uint(const std::string& key, T& out) {
    const Value* v = take(key);
    if (!v) return;
    if (v->kind != Value::Kind::integer || v->i < 0)
      throw ConfigError(where(key) + " must be a nonnegative integer");
    out = static_cast<T>(v->i);
  }

  void get_double(const std::string& key, double& out) {
    const Value* v = take(key);
    if (!v) return;
    if (v->kind != Value::Kind::integer && v->kind != Value::Kind::real)
      throw ConfigError(where(key) + " must be a number");
    out = v->d;
  }

  void get_string(const std::string& key, std::string& out) {
    const Value* v = take(key);
    if (!v) return;
    if (v->kind != Value::Kind::string) throw ConfigError(where(key) + " must be a string");
    out = v->s;
  }

  void get_string_array(const std::string& key, std::vector<std::string>& out) {
    const Value* v = take(key);
    if (!v) return;
    if (v->kind != Value::Kind::array)
      throw ConfigError(where(key) + " must be an array of strings");
    out.clear();
    for (const Value& item : v->items) {
      if (item.kind != Value::Kind::string)
        throw ConfigError(where(key) + " must contain only strings");
      out.push_back(item.s);
    }
  }

  void reject_leftovers() const {
    for (const auto& [key, value] : kv_)
      throw ConfigError("unknown key \"" + key + "\"" +
                        (name_.empty() ? "" : " in section [" + name_ + "]"));
  }

private:
  const Value* take(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return nullptr;
    taken_.push_back(it->second);
    kv_.erase(it);
    return &taken_.back();
  }

  std::string where(const std::string& key) const {
    return name_.empty() ? key : "[" + name_ + "] " + key;
  }

  std::map<std::string, Value>& kv_;
  std::string name_;
  std::vector<Value> taken_;
};

}  // namespace

RunConfig default_config(uint64_t seed) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.env.seed = seed;
  cfg.train.seed = seed;
  cfg.eval.seed = seed;
  return cfg;
}

RunConfig parse_config_text(const std::string& text) {
  Tree tree = parse_tree(text);
  RunConfig cfg;

  bool top_seed_given = false;
  {
    Section top(tree[""], "");
    top.get_string("label", cfg.label);
    std::map<std::string, Value>& kv = tree[""];
    if (kv.count("seed")) top_seed_given = true;
    top.get_uint("seed", cfg.seed);
    top.get_string("out_dir", cfg.out_dir);
    top.reject_leftovers();
  }
  if (top_seed_given) {
    cfg.env.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    cfg.eval.seed = cfg.seed;
  }

  if (tree.count("env")) {
    Section s(tree["env"], "env");
    s.get_uint("n_facts_per_video", cfg.env.n_facts_per_video);
    s.get_uint("fact_vocab_size", cfg.env.fact_vocab_size);
    s.get_uint("filler_vocab_size", cfg.env.filler_vocab_size);
    s.get_uint("n_options", cfg.env.n_options);
    s.get_uint("seed", cfg.env.seed);
    std::vector<std::string> kinds;
    s.get_string_array("question_kinds", kinds);
    if (!kinds.empty()) {
      cfg.env.question_kinds.clear();
      for (const std::string& k : kinds)
        cfg.env.question_kinds.push_back(env::question_kind_from_string(k));
    }
    s.reject_leftovers();
  }

  if (tree.count("policy")) {
    Section s(tree["policy"], "policy");
    std::string kind;
    s.get_string("init", kind);
    if (!kind.empty()) cfg.policy.kind = policy_init_from_string(kind);
    s.get_double("noise_scale", cfg.policy.noise_scale);
    s.get_double("w_lang", cfg.policy.w_lang);
    s.get_double("w_vis", cfg.policy.w_vis);
    s.get_double("dilution_kappa", cfg.policy.dilution_kappa);
    s.get_uint("trace_len", cfg.policy.trace_len);
    s.reject_leftovers();
  }

  if (tree.count("rewards")) {
    Section s(tree["rewards"], "rewards");
    s.get_double("alpha", cfg.rewards.alpha);
    s.get_double("w_format", cfg.rewards.w_fmt);
    s.get_double("w_length", cfg.rewards.w_len);
    s.get_uint("length_min", cfg.rewards.length_min);
    s.get_uint("length_max", cfg.rewards.length_max);
    s.reject_leftovers();
  }

  if (tree.count("train")) {
    Section s(tree["train"], "train");
    s.get_uint("group_size", cfg.train.group_size);
    s.get_double("clip_epsilon", cfg.train.clip_epsilon);
    s.get_double("kl_beta", cfg.train.kl_beta);
    s.get_double("learning_rate", cfg.train.learning_rate);
    s.get_uint("iterations", cfg.train.iterations);
    s.get_uint("episodes_per_iter", cfg.train.episodes_per_iter);
    s.get_double("std_floor", cfg.train.std_floor);
    s.get_uint("seed", cfg.train.seed);
    s.get_uint("parallelism", cfg.train.parallelism);
    std::string mode, judge_kind;
    s.get_string("evidence_mode", mode);
    if (!mode.empty()) cfg.train.evidence_mode = env::evidence_mode_from_string(mode);
    s.get_string("judge", judge_kind);
    if (!judge_kind.empty()) cfg.train.judge = grpo::judge_kind_from_string(judge_kind);
    s.reject_leftovers();
  }

  if (tree.count("eval")) {
    Section s(tree["eval"], "eval");
    s.get_uint("n_episodes", cfg.eval.n_episodes);
    s.get_uint("votes", cfg.eval.votes);
    s.get_double("temperature", cfg.eval.temperature);
    s.get_uint("seed", cfg.eval.seed);
    s.reject_leftovers();
  }

  if (tree.count("judge_client")) {
    Section s(tree["judge_client"], "judge_client");
    s.get_string("endpoint", cfg.judge_client.endpoint);
    uint32_t timeout = static_cast<uint32_t>(cfg.judge_client.timeout_ms);
    uint32_t in_flight = static_cast<uint32_t>(cfg.judge_client.max_in_flight);
    uint32_t retries = static_cast<uint32_t>(cfg.judge_client.retries);
    s.get_uint("timeout_ms", timeout);
    s.get_uint("max_in_flight", in_flight);
    s.get_uint("retries", retries);
    cfg.judge_client.timeout_ms = static_cast<int>(timeout);
    cfg.judge_client.max_in_flight = static_cast<int>(in_flight);
    cfg.judge_client.retries = static_cast<int>(retries);
    s.get_double("temperature", cfg.judge_client.temperature);
    std::string policy;
    s.get_string("error_policy", policy);
    if (policy == "fail") cfg.judge_client.error_policy = judge::ErrorPolicy::fail_run;
    else if (policy == "zero") cfg.judge_client.error_policy = judge::ErrorPolicy::treat_as_zero;
    else if (!policy.empty())
      throw ConfigError("[judge_client] error_policy must be \"fail\" or \"zero\"");
    s.reject_leftovers();
  }

  for (const auto& [section, kv] : tree) {
    if (section == "" || section == "env" || section == "policy" || section == "rewards" ||
        section == "train" || section == "eval" || section == "judge_client")
      continue;
    throw ConfigError("unknown section [" + section + "]");
  }

  if (const char* ep = std::getenv("VER_JUDGE_ENDPOINT"); ep && *ep)
    cfg.judge_client.endpoint = ep;

  validate(cfg);
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config file not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void validate(const RunConfig& cfg) {
  env::validate(cfg.env);
  rewards::validate(cfg.rewards);
  grpo::validate(cfg.train);
  judge::validate(cfg.judge_client);
  if (cfg.policy.noise_scale < 0.0) throw ConfigError("[policy] noise_scale must be >= 0");
  if (cfg.policy.w_lang < 0.0 || cfg.policy.w_vis < 0.0)
    throw ConfigError("[policy] channel scales must be >= 0");
  if (cfg.policy.dilution_kappa < 0.0)
    throw ConfigError("[policy] dilution_kappa must be >= 0");
  if (cfg.policy.trace_len < 1 || cfg.policy.trace_len > policy::kMaxTraceLen)
    throw ConfigError("[policy] trace_len must lie in [1," +
                      std::to_string(policy::kMaxTraceLen) + "]");
  if (cfg.eval.votes < 1) throw ConfigError("[eval] votes must be >= 1");
  if (cfg.eval.n_episodes < 1) throw ConfigError("[eval] n_episodes must be >= 1");
  if (cfg.eval.temperature < 0.0) throw ConfigError("[eval] temperature must be >= 0");
  if (cfg.label.empty()) throw ConfigError("label must not be empty");
}

policy::PolicyParams build_initial_params(const RunConfig& cfg) {
  policy::InitConfig init;
  init.noise_scale = cfg.policy.kind == PolicyInitKind::noise ? cfg.policy.noise_scale : 0.0;
  init.w_lang = cfg.policy.w_lang;
  init.w_vis = cfg.policy.w_vis;
  init.dilution_kappa = cfg.policy.dilution_kappa;
  init.seed = cfg.seed;
  if (cfg.policy.kind == PolicyInitKind::calibrated)
    return policy::calibrated_preset(cfg.env, init);
  return policy::init_params(cfg.env, init);
}

}  // namespace ver::harness
