#include "ver/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ver/errors.hpp"
#include "ver/judge_client.hpp"

namespace ver::harness {

namespace fs = std::filesystem;

grpo::JudgeFn make_judge_fn(const RunConfig& cfg) {
  if (cfg.train.judge == grpo::JudgeKind::rule) return grpo::rule_judge_fn();

  judge::JudgeClientConfig client_cfg = cfg.judge_client;
  return [client_cfg](const policy::Response& resp, const env::EvidenceList& ev,
                      const env::Episode& ep) -> judge::Verdict {
    try {
      return judge::remote_judge(client_cfg, ep.question.text,
                                 env::trace_text(ep, resp.trace), ev.lines);
    } catch (const judge::JudgeError&) {
      if (client_cfg.error_policy == judge::ErrorPolicy::treat_as_zero) {
        judge::Verdict v;
        v.e = 0;
        v.source = judge::Source::remote;
        return v;
      }
      throw;
    }
  };
}

namespace {

std::string checkpoint_extension(CheckpointFormat f) {
  return f == CheckpointFormat::json ? ".ckpt.json" : ".ckpt.bin";
}

void write_text_file(const std::string& path, const std::string& text) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("short write: " + path);
}

std::string format_double(double v) {
  nlohmann::json j = v;
  return j.dump();
}

}  // namespace

TrainOutput run_train(const RunConfig& cfg, const TrainOptions& opts) {
  validate(cfg);
  fs::create_directories(cfg.out_dir);

  policy::PolicyParams initial = build_initial_params(cfg);
  grpo::TrainConfig train_cfg = cfg.train;
  train_cfg.trace_len = cfg.policy.trace_len;

  grpo::JudgeFn judge_fn = make_judge_fn(cfg);
  grpo::TrainResult result = grpo::train(train_cfg, cfg.env, cfg.rewards, initial, judge_fn);

  TrainOutput out;
  out.metrics_path = (fs::path(cfg.out_dir) / (cfg.label + ".train.jsonl")).string();
  // Truncate any previous stream for this label so reruns are comparable.
  std::ofstream(out.metrics_path, std::ios::trunc).close();
  MetricsWriter writer(out.metrics_path, opts.normalize_timestamps);
  for (const grpo::IterRecord& rec : result.report.iterations) {
    MetricsRecord m;
    m.label = cfg.label;
    m.kind = "train_iter";
    m.payload = {{"iter", static_cast<double>(rec.iter)},
                 {"mean_reward", rec.mean_reward},
                 {"mean_abs_advantage", rec.mean_abs_advantage},
                 {"clip_frac", rec.clip_fraction},
                 {"kl", rec.kl_to_ref},
                 {"accuracy", rec.accuracy},
                 {"grounding_rate", rec.grounding_rate}};
    writer.write(m);
  }

  Checkpoint ckpt;
  ckpt.env_cfg = cfg.env;
  ckpt.params = result.params;
  ckpt.trace_len = cfg.policy.trace_len;
  out.checkpoint_path =
      (fs::path(cfg.out_dir) / (cfg.label + checkpoint_extension(opts.checkpoint_format)))
          .string();
  save_checkpoint(out.checkpoint_path, ckpt, opts.checkpoint_format);
  out.report = std::move(result.report);
  return out;
}

analysis::EvalMetrics run_eval(const EvalRequest& req) {
  Checkpoint ckpt = load_checkpoint(req.checkpoint_path);
  analysis::EvalConfig eval_cfg;
  eval_cfg.n_episodes = req.n_episodes;
  eval_cfg.mode = req.mode;
  eval_cfg.votes = req.votes;
  eval_cfg.temperature = req.temperature;
  eval_cfg.trace_len = ckpt.trace_len;
  eval_cfg.seed = req.seed;
  analysis::EvalMetrics m = analysis::eval_policy(ckpt.params, ckpt.env_cfg, eval_cfg);

  if (!req.out_dir.empty()) {
    fs::create_directories(req.out_dir);
    MetricsWriter writer((fs::path(req.out_dir) / (req.label + ".eval.jsonl")).string(), false);
    MetricsRecord rec;
    rec.label = req.label;
    rec.kind = "eval";
    rec.payload = {{"mode", req.mode == policy::Mode::direct ? 0.0 : 1.0},
                   {"votes", static_cast<double>(m.votes)},
                   {"n_episodes", static_cast<double>(req.n_episodes)},
                   {"temperature", req.temperature},
                   {"accuracy", m.accuracy},
                   {"grounding_rate", m.grounding_rate},
                   {"mean_trace_len", m.mean_trace_len}};
    writer.write(rec);
  }
  return m;
}

std::string run_drift_csv(const DriftRequest& req) {
  analysis::DriftConfig cfg;
  cfg.step_error = req.step_error;
  cfg.trials = req.trials;
  cfg.seed = req.seed;
  cfg.chain_lengths.clear();
  for (uint32_t t = 1; t <= req.t_max; ++t) cfg.chain_lengths.push_back(t);

  auto points = analysis::simulate_drift(cfg);
  std::string csv = "T,success_rate,stderr\n";
  for (const auto& p : points) {
    csv += std::to_string(p.chain_length);
    csv += ',';
    csv += format_double(p.success_rate);
    csv += ',';
    csv += format_double(p.stderr_est);
    csv += '\n';
  }
  return csv;
}

std::string run_vote_sweep_csv(const VoteSweepRequest& req) {
  if (req.max_votes < 1) throw ConfigError("max_votes must be >= 1");
  Checkpoint ckpt = load_checkpoint(req.checkpoint_path);
  std::string csv = "votes,accuracy,stderr\n";
  for (uint32_t v = 1; v <= req.max_votes; ++v) {
    analysis::EvalConfig eval_cfg;
    eval_cfg.n_episodes = req.n_episodes;
    eval_cfg.mode = policy::Mode::cot;
    eval_cfg.votes = v;
    eval_cfg.temperature = req.temperature;
    eval_cfg.trace_len = ckpt.trace_len;
    eval_cfg.seed = req.seed;
    analysis::EvalMetrics m = analysis::eval_policy(ckpt.params, ckpt.env_cfg, eval_cfg);
    double se = std::sqrt(m.accuracy * (1.0 - m.accuracy) / req.n_episodes);
    csv += std::to_string(v) + ',' + format_double(m.accuracy) + ',' + format_double(se) + '\n';
  }
  return csv;
}

void run_gen_corpus(const RunConfig& cfg, uint32_t count, const std::string& out_path) {
  validate(cfg);
  std::string text;
  for (uint32_t i = 0; i < count; ++i) {
    env::Episode ep = env::gen_episode(cfg.env, i);
    env::EvidenceList qd = env::gen_evidence(ep, env::EvidenceMode::QD);
    env::EvidenceList vc = env::gen_evidence(ep, env::EvidenceMode::VC);
    text += "{\"episode\":" + env::episode_to_json(ep) +
            ",\"evidence_qd\":" + env::evidence_to_json(qd) +
            ",\"evidence_vc\":" + env::evidence_to_json(vc) + "}\n";
  }
  write_text_file(out_path, text);
}

}  // namespace ver::harness
