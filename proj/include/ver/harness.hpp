#pragma once

#include <string>

#include "ver/checkpoint.hpp"
#include "ver/config.hpp"
#include "ver/metrics.hpp"

namespace ver::harness {

struct TrainOptions {
  CheckpointFormat checkpoint_format = CheckpointFormat::binary;
  bool normalize_timestamps = false;
};

struct TrainOutput {
  std::string checkpoint_path;
  std::string metrics_path;
  grpo::TrainReport report;
};

// Full training run: rollouts under the configured judge, one JSONL record
// per iteration, checkpoint at the end. All outputs land in cfg.out_dir and
// are deterministic functions of the config (with normalized timestamps).
TrainOutput run_train(const RunConfig& cfg, const TrainOptions& opts);

struct EvalRequest {
  std::string checkpoint_path;
  policy::Mode mode = policy::Mode::cot;
  uint32_t votes = 1;
  uint32_t n_episodes = 1000;
  double temperature = 0.01;
  uint64_t seed = 0;
  std::string out_dir;  // empty: no metrics record written
  std::string label = "eval";
};

analysis::EvalMetrics run_eval(const EvalRequest& req);

struct DriftRequest {
  double step_error = 0.01;
  uint32_t t_max = 20;
  uint32_t trials = 10000;
  uint64_t seed = 0;
};

// CSV text: header plus one row per chain length 1..t_max.
std::string run_drift_csv(const DriftRequest& req);

struct VoteSweepRequest {
  std::string checkpoint_path;
  uint32_t max_votes = 20;
  uint32_t n_episodes = 500;
  double temperature = 1.0;
  uint64_t seed = 0;
};

// CSV text: header plus one row per vote count 1..max_votes.
std::string run_vote_sweep_csv(const VoteSweepRequest& req);

// JSONL corpus of episodes with QD and VC evidence, one line per episode.
void run_gen_corpus(const RunConfig& cfg, uint32_t count, const std::string& out_path);

// Builds the judge function the training loop uses (rule judge, or remote
// client honoring the configured error policy).
grpo::JudgeFn make_judge_fn(const RunConfig& cfg);

}  // namespace ver::harness
