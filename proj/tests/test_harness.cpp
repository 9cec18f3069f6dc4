#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ver/harness.hpp"

using namespace ver;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ver_test_" + std::to_string(reinterpret_cast<uintptr_t>(this)) + "_" +
            std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

harness::RunConfig small_run_config(const std::string& out_dir, uint64_t seed = 3) {
  harness::RunConfig cfg = harness::default_config(seed);
  cfg.out_dir = out_dir;
  cfg.train.iterations = 5;
  cfg.train.group_size = 4;
  cfg.train.episodes_per_iter = 2;
  cfg.policy.trace_len = 10;
  cfg.eval.n_episodes = 20;
  return cfg;
}

}  // namespace

TEST_CASE("parse_config applies defaults for a minimal file") {
  harness::RunConfig cfg = harness::parse_config_text("seed = 9\n");
  CHECK(cfg.seed == 9);
  CHECK(cfg.env.seed == 9);
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.rewards.alpha == 0.3);
  CHECK(cfg.train.group_size == 8);
  CHECK(cfg.train.iterations == 2000);
  CHECK(cfg.train.clip_epsilon == 0.2);
  CHECK(cfg.train.kl_beta == 0.04);
  CHECK(cfg.policy.dilution_kappa == 0.25);
  CHECK(cfg.policy.w_vis == 0.3);
  CHECK(cfg.eval.temperature == 0.01);
}

TEST_CASE("parse_config rejects bad input by name") {
  SUBCASE("invalid group size") {
    CHECK_THROWS_WITH_AS(harness::parse_config_text("[train]\ngroup_size = 1\n"),
                         doctest::Contains("group_size"), ConfigError);
  }
  SUBCASE("unknown key") {
    CHECK_THROWS_WITH_AS(harness::parse_config_text("[train]\ngrpo_sizee = 8\n"),
                         doctest::Contains("grpo_sizee"), ConfigError);
  }
  SUBCASE("unknown section") {
    CHECK_THROWS_WITH_AS(harness::parse_config_text("[grpo]\ngroup_size = 8\n"),
                         doctest::Contains("grpo"), ConfigError);
  }
  SUBCASE("type errors") {
    CHECK_THROWS_AS(harness::parse_config_text("[train]\ngroup_size = \"eight\"\n"),
                    ConfigError);
    CHECK_THROWS_AS(harness::parse_config_text("[env]\nquestion_kinds = [\"sometimes\"]\n"),
                    ConfigError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(harness::parse_config("/nonexistent/path/c.toml"), IoError);
  }
  SUBCASE("duplicate keys") {
    CHECK_THROWS_AS(harness::parse_config_text("seed = 1\nseed = 2\n"), ConfigError);
  }
}

TEST_CASE("parse_config reads a full file with comments") {
  std::string text = R"(# run header
label = "demo"
seed = 4
out_dir = "demo_runs"

[env]
n_facts_per_video = 3
fact_vocab_size = 12   # needs slack for distractors
question_kinds = ["slot"]

[policy]
init = "calibrated"
trace_len = 9

[rewards]
alpha = 0.5

[train]
group_size = 4
iterations = 7
evidence_mode = "vc"
judge = "rule"

[eval]
votes = 20
)";
  harness::RunConfig cfg = harness::parse_config_text(text);
  CHECK(cfg.label == "demo");
  CHECK(cfg.env.n_facts_per_video == 3);
  CHECK(cfg.env.fact_vocab_size == 12);
  CHECK(cfg.env.question_kinds.size() == 1);
  CHECK(cfg.policy.trace_len == 9);
  CHECK(cfg.rewards.alpha == 0.5);
  CHECK(cfg.train.group_size == 4);
  CHECK(cfg.train.evidence_mode == env::EvidenceMode::VC);
  CHECK(cfg.eval.votes == 20);
}

TEST_CASE("checkpoint round trip") {
  TempDir tmp;
  env::EnvConfig env_cfg;
  env_cfg.seed = 11;
  policy::InitConfig init;
  init.noise_scale = 0.3;
  init.seed = 5;

  harness::Checkpoint ckpt;
  ckpt.env_cfg = env_cfg;
  ckpt.params = policy::init_params(env_cfg, init);
  ckpt.trace_len = 9;

  for (auto format : {harness::CheckpointFormat::json, harness::CheckpointFormat::binary}) {
    std::string path = (tmp.path / (format == harness::CheckpointFormat::json ? "a.ckpt.json"
                                                                              : "a.ckpt.bin"))
                           .string();
    harness::save_checkpoint(path, ckpt, format);
    harness::Checkpoint loaded = harness::load_checkpoint(path);
    CHECK(loaded.trace_len == 9);
    CHECK(env::config_hash(loaded.env_cfg) == env::config_hash(env_cfg));
    for (size_t i = 0; i < policy::num_learnable(ckpt.params); ++i)
      CHECK(policy::get_flat(loaded.params, i) == policy::get_flat(ckpt.params, i));
  }

  SUBCASE("tampered env fields are rejected by the hash") {
    std::string path = (tmp.path / "a.ckpt.json").string();
    std::string text = slurp(path);
    auto pos = text.find("\"n_options\": 4");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 14, "\"n_options\": 5");
    std::ofstream(path, std::ios::trunc) << text;
    CHECK_THROWS_AS(harness::load_checkpoint(path), IoError);
  }
}

TEST_CASE("metrics writer flushes complete lines and tolerates torn tails") {
  TempDir tmp;
  std::string path = (tmp.path / "m.jsonl").string();
  {
    harness::MetricsWriter w(path, true);
    for (int i = 0; i < 3; ++i) {
      harness::MetricsRecord rec;
      rec.label = "t";
      rec.kind = "train_iter";
      rec.payload = {{"iter", static_cast<double>(i)}, {"mean_reward", 0.5 * i}};
      w.write(rec);
    }
  }
  auto records = harness::read_metrics(path);
  REQUIRE(records.size() == 3);
  CHECK(records[2].payload[0].second == 2.0);

  // A torn trailing line (crash mid-write) is dropped, earlier records stay.
  std::ofstream(path, std::ios::app) << "{\"v\":1,\"label\":\"t\",\"ts\":0,\"kind\":\"trai";
  auto recovered = harness::read_metrics(path);
  CHECK(recovered.size() == 3);
}

TEST_CASE("summary aggregates one row per run and is idempotent") {
  TempDir tmp;
  for (std::string label : {"a", "b"}) {
    harness::MetricsWriter w((tmp.path / (label + ".train.jsonl")).string(), true);
    for (int i = 0; i < 2; ++i) {
      harness::MetricsRecord rec;
      rec.label = label;
      rec.kind = "train_iter";
      rec.payload = {{"iter", static_cast<double>(i)},   {"mean_reward", 1.0 + i},
                     {"clip_frac", 0.0},                 {"kl", 0.01},
                     {"accuracy", 0.5},                  {"grounding_rate", 0.25}};
      w.write(rec);
    }
  }
  std::string csv_path = harness::emit_summary(tmp.str());
  std::string first = slurp(csv_path);
  auto lines = std::count(first.begin(), first.end(), '\n');
  CHECK(lines == 3);  // header + two runs
  CHECK(first.find("a,") != std::string::npos);
  CHECK(first.find("b,") != std::string::npos);
  CHECK(first.find("2") != std::string::npos);  // final mean_reward of both runs

  std::string second = slurp(harness::emit_summary(tmp.str()));
  CHECK(first == second);
}

TEST_CASE("run_train writes deterministic outputs") {
  TempDir tmp_a, tmp_b;
  harness::TrainOptions opts;
  opts.normalize_timestamps = true;
  opts.checkpoint_format = harness::CheckpointFormat::binary;

  auto out_a = harness::run_train(small_run_config(tmp_a.str()), opts);
  auto out_b = harness::run_train(small_run_config(tmp_b.str()), opts);

  CHECK(slurp(out_a.checkpoint_path) == slurp(out_b.checkpoint_path));
  CHECK(slurp(out_a.metrics_path) == slurp(out_b.metrics_path));
  CHECK(out_a.report.iterations.size() == 5);
}

TEST_CASE("config errors surface before any file is created") {
  TempDir tmp;
  harness::RunConfig cfg = small_run_config((tmp.path / "sub").string());
  cfg.train.group_size = 1;
  CHECK_THROWS_AS(harness::run_train(cfg, harness::TrainOptions{}), ConfigError);
  CHECK_FALSE(fs::exists(tmp.path / "sub"));
}

TEST_CASE("gen corpus emits parseable self-consistent JSONL") {
  TempDir tmp;
  harness::RunConfig cfg = small_run_config(tmp.str());
  std::string path = (tmp.path / "corpus.jsonl").string();
  harness::run_gen_corpus(cfg, 25, path);

  std::ifstream in(path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    CHECK(line.find("\"episode\"") != std::string::npos);
    CHECK(line.find("\"evidence_qd\"") != std::string::npos);
    CHECK(line.find("\"evidence_vc\"") != std::string::npos);
  }
  CHECK(rows == 25);
}

TEST_CASE("drift CSV has one row per chain length") {
  harness::DriftRequest req;
  req.step_error = 0.01;
  req.t_max = 20;
  req.trials = 2000;
  std::string csv = harness::run_drift_csv(req);
  auto lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 21);  // header + 20 rows
  CHECK(csv.rfind("T,success_rate,stderr\n", 0) == 0);
}

TEST_CASE("eval runs from a checkpoint in both modes") {
  TempDir tmp;
  harness::TrainOptions opts;
  opts.normalize_timestamps = true;
  auto out = harness::run_train(small_run_config(tmp.str()), opts);

  harness::EvalRequest req;
  req.checkpoint_path = out.checkpoint_path;
  req.n_episodes = 50;
  req.temperature = 1.0;
  req.seed = 2;

  req.mode = policy::Mode::direct;
  auto direct = harness::run_eval(req);
  req.mode = policy::Mode::cot;
  auto cot = harness::run_eval(req);
  CHECK(direct.accuracy >= 0.0);
  CHECK(direct.accuracy <= 1.0);
  CHECK(cot.mean_trace_len == 10.0);
  CHECK(direct.mean_trace_len == 0.0);
}
