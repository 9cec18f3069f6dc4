#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "ver/errors.hpp"
#include "ver/harness.hpp"
#include "ver/judge_client.hpp"

namespace {

using namespace ver;

void write_or_print(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + out_path);
  out << text;
}

int run(int argc, char** argv) {
  CLI::App app{"evidence-rewarded GRPO on a synthetic video-QA environment"};
  app.require_subcommand(1);

  // ---- train ----
  auto* train = app.add_subcommand("train", "run VER-GRPO training from a config file");
  std::string train_config;
  double alpha_override = -1.0;
  int64_t iterations_override = -1, seed_override = -1;
  std::string out_override, label_override, ckpt_format = "binary";
  bool no_timestamps = false;
  train->add_option("--config", train_config, "config file")->required();
  train->add_option("--alpha", alpha_override, "override evidence bonus weight");
  train->add_option("--iterations", iterations_override, "override iteration count");
  train->add_option("--seed", seed_override, "override all seeds");
  train->add_option("--out", out_override, "override output directory");
  train->add_option("--label", label_override, "override run label");
  train->add_option("--checkpoint-format", ckpt_format, "json or binary")
      ->check(CLI::IsMember({"json", "binary"}));
  train->add_flag("--no-timestamps", no_timestamps,
                  "write ts=0 in metrics so reruns are byte-comparable");

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint (direct vs cot, voting)");
  harness::EvalRequest eval_req;
  std::string eval_mode = "cot";
  eval->add_option("--checkpoint", eval_req.checkpoint_path, "checkpoint file")->required();
  eval->add_option("--mode", eval_mode, "direct or cot")
      ->check(CLI::IsMember({"direct", "cot"}));
  eval->add_option("--votes", eval_req.votes, "responses per episode for majority voting");
  eval->add_option("--episodes", eval_req.n_episodes, "episodes to evaluate");
  eval->add_option("--temperature", eval_req.temperature, "sampling temperature");
  eval->add_option("--seed", eval_req.seed, "sampling seed");
  eval->add_option("--out", eval_req.out_dir, "directory for the eval metrics record");
  eval->add_option("--label", eval_req.label, "record label");

  // ---- drift ----
  auto* drift = app.add_subcommand("drift", "chain-failure sweep over chain lengths");
  harness::DriftRequest drift_req;
  std::string drift_out;
  drift->add_option("--eps", drift_req.step_error, "per-step error probability")->required();
  drift->add_option("--tmax", drift_req.t_max, "maximum chain length")->required();
  drift->add_option("--trials", drift_req.trials, "trials per chain length");
  drift->add_option("--seed", drift_req.seed, "simulation seed");
  drift->add_option("--out", drift_out, "CSV output path (default stdout)");

  // ---- vote-sweep ----
  auto* sweep = app.add_subcommand("vote-sweep", "accuracy vs vote count curve");
  harness::VoteSweepRequest sweep_req;
  std::string sweep_out;
  sweep->add_option("--checkpoint", sweep_req.checkpoint_path, "checkpoint file")->required();
  sweep->add_option("--max-votes", sweep_req.max_votes, "sweep votes from 1 to this");
  sweep->add_option("--episodes", sweep_req.n_episodes, "episodes per point");
  sweep->add_option("--temperature", sweep_req.temperature, "sampling temperature");
  sweep->add_option("--seed", sweep_req.seed, "sampling seed");
  sweep->add_option("--out", sweep_out, "CSV output path (default stdout)");

  // ---- gen-corpus ----
  auto* corpus = app.add_subcommand("gen-corpus", "export episodes with QD/VC evidence");
  std::string corpus_config, corpus_out;
  uint32_t corpus_count = 100;
  corpus->add_option("--config", corpus_config, "config file")->required();
  corpus->add_option("--count", corpus_count, "number of episodes");
  corpus->add_option("--out", corpus_out, "JSONL output path")->required();

  // ---- judge-stub ----
  auto* stub = app.add_subcommand("judge-stub", "serve the test judge endpoint");
  int stub_port = 8791;
  std::string stub_host = "127.0.0.1";
  stub->add_option("--port", stub_port, "port to listen on");
  stub->add_option("--host", stub_host, "host to bind");

  // ---- summary ----
  auto* summary = app.add_subcommand("summary", "aggregate run directories into summary.csv");
  std::string summary_dir;
  summary->add_option("--dir", summary_dir, "directory holding *.train.jsonl streams")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    harness::RunConfig cfg = harness::parse_config(train_config);
    if (alpha_override >= 0.0) cfg.rewards.alpha = alpha_override;
    if (iterations_override >= 0) cfg.train.iterations = static_cast<uint32_t>(iterations_override);
    if (seed_override >= 0) {
      cfg.seed = static_cast<uint64_t>(seed_override);
      cfg.env.seed = cfg.seed;
      cfg.train.seed = cfg.seed;
      cfg.eval.seed = cfg.seed;
    }
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (!label_override.empty()) cfg.label = label_override;
    harness::validate(cfg);
    harness::TrainOptions opts;
    opts.checkpoint_format = harness::checkpoint_format_from_string(ckpt_format);
    opts.normalize_timestamps = no_timestamps;
    harness::TrainOutput out = harness::run_train(cfg, opts);
    const auto& iters = out.report.iterations;
    std::cout << "trained " << iters.size() << " iterations";
    if (!iters.empty()) {
      const auto& last = iters.back();
      std::cout << "; final accuracy " << last.accuracy << ", grounding_rate "
                << last.grounding_rate << ", mean_reward " << last.mean_reward;
    }
    std::cout << "\ncheckpoint: " << out.checkpoint_path
              << "\nmetrics:    " << out.metrics_path << "\n";
    return 0;
  }

  if (eval->parsed()) {
    eval_req.mode = policy::mode_from_string(eval_mode);
    analysis::EvalMetrics m = harness::run_eval(eval_req);
    std::cout << "mode=" << eval_mode << " votes=" << m.votes << " accuracy=" << m.accuracy
              << " grounding_rate=" << m.grounding_rate
              << " mean_trace_len=" << m.mean_trace_len << "\n";
    return 0;
  }

  if (drift->parsed()) {
    write_or_print(drift_out, harness::run_drift_csv(drift_req));
    return 0;
  }

  if (sweep->parsed()) {
    write_or_print(sweep_out, harness::run_vote_sweep_csv(sweep_req));
    return 0;
  }

  if (corpus->parsed()) {
    harness::RunConfig cfg = harness::parse_config(corpus_config);
    harness::run_gen_corpus(cfg, corpus_count, corpus_out);
    std::cout << "wrote " << corpus_count << " episodes to " << corpus_out << "\n";
    return 0;
  }

  if (stub->parsed()) {
    static judge::StubJudgeServer server;
    int port = server.start(stub_host, stub_port);
    std::cout << "judge stub listening on http://" << stub_host << ":" << port
              << "/judge (ctrl-c to stop)\n";
    std::signal(SIGINT, [](int) { server.request_stop(); });
    std::signal(SIGTERM, [](int) { server.request_stop(); });
    while (server.running()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    return 0;
  }

  if (summary->parsed()) {
    std::string path = harness::emit_summary(summary_dir);
    std::cout << "wrote " << path << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ver::ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const ver::InputError& e) {
    std::cerr << "error: input: " << e.what() << "\n";
    return 2;
  } catch (const ver::judge::JudgeError& e) {
    std::cerr << "error: judge: " << e.what() << "\n";
    return 3;
  } catch (const ver::IoError& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return 4;
  } catch (const ver::Error& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: unexpected: " << e.what() << "\n";
    return 1;
  }
}
