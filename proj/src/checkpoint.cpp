#include "ver/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ver/errors.hpp"

namespace ver::harness {

using ojson = nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'V', 'E', 'R', 'C', 'K', 'P', 'T', '\x01'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  put_u64(out, bits);
}

struct Reader {
  const std::string& data;
  size_t pos = 0;

  uint8_t byte() {
    if (pos >= data.size()) throw IoError("checkpoint truncated");
    return static_cast<uint8_t>(data[pos++]);
  }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(byte()) << (8 * i);
    return v;
  }
  uint64_t u64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(byte()) << (8 * i);
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
  }
};

ojson env_to_json(const env::EnvConfig& cfg) {
  ojson j;
  j["n_facts_per_video"] = cfg.n_facts_per_video;
  j["fact_vocab_size"] = cfg.fact_vocab_size;
  j["filler_vocab_size"] = cfg.filler_vocab_size;
  j["n_options"] = cfg.n_options;
  ojson kinds = ojson::array();
  for (auto k : cfg.question_kinds) kinds.push_back(env::to_string(k));
  j["question_kinds"] = kinds;
  j["seed"] = cfg.seed;
  return j;
}

env::EnvConfig env_from_json(const ojson& j) {
  env::EnvConfig cfg;
  cfg.n_facts_per_video = j.at("n_facts_per_video").get<uint32_t>();
  cfg.fact_vocab_size = j.at("fact_vocab_size").get<uint32_t>();
  cfg.filler_vocab_size = j.at("filler_vocab_size").get<uint32_t>();
  cfg.n_options = j.at("n_options").get<uint32_t>();
  cfg.question_kinds.clear();
  for (const auto& k : j.at("question_kinds"))
    cfg.question_kinds.push_back(env::question_kind_from_string(k.get<std::string>()));
  cfg.seed = j.at("seed").get<uint64_t>();
  return cfg;
}

}  // namespace

CheckpointFormat checkpoint_format_from_string(const std::string& s) {
  if (s == "json") return CheckpointFormat::json;
  if (s == "binary" || s == "bin") return CheckpointFormat::binary;
  throw ConfigError("unknown checkpoint format: " + s);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt, CheckpointFormat format) {
  const policy::PolicyParams& p = ckpt.params;
  std::string blob;
  if (format == CheckpointFormat::json) {
    ojson j;
    j["format"] = "ver-checkpoint";
    j["version"] = kVersion;
    j["env_hash"] = env::config_hash(ckpt.env_cfg);
    j["env"] = env_to_json(ckpt.env_cfg);
    j["trace_len"] = ckpt.trace_len;
    ojson pol;
    pol["n_options"] = p.n_options;
    pol["w_lang"] = p.w_lang;
    pol["w_vis"] = p.w_vis;
    pol["dilution_kappa"] = p.dilution_kappa;
    ojson lang = ojson::array();
    for (const auto& row : p.lang_table) lang.push_back(row);
    pol["lang_table"] = lang;
    ojson vis = ojson::array();
    for (const auto& row : p.vis_table) vis.push_back(row);
    pol["vis_table"] = vis;
    pol["answer_table"] = p.answer_table;
    j["policy"] = pol;
    blob = j.dump(2);
    blob.push_back('\n');
  } else {
    blob.assign(kMagic, kMagic + sizeof kMagic);
    put_u32(blob, kVersion);
    put_u64(blob, env::config_hash(ckpt.env_cfg));
    put_u32(blob, ckpt.env_cfg.n_facts_per_video);
    put_u32(blob, ckpt.env_cfg.fact_vocab_size);
    put_u32(blob, ckpt.env_cfg.filler_vocab_size);
    put_u32(blob, ckpt.env_cfg.n_options);
    put_u32(blob, static_cast<uint32_t>(ckpt.env_cfg.question_kinds.size()));
    for (auto k : ckpt.env_cfg.question_kinds)
      put_u32(blob, k == env::QuestionKind::slot ? 0 : 1);
    put_u64(blob, ckpt.env_cfg.seed);
    put_u32(blob, ckpt.trace_len);
    put_u32(blob, p.n_options);
    put_f64(blob, p.w_lang);
    put_f64(blob, p.w_vis);
    put_f64(blob, p.dilution_kappa);
    for (const auto& row : p.lang_table)
      for (double v : row) put_f64(blob, v);
    for (const auto& row : p.vis_table)
      for (double v : row) put_f64(blob, v);
    put_u32(blob, static_cast<uint32_t>(p.answer_table.size()));
    for (double v : p.answer_table) put_f64(blob, v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("short write to checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string data = ss.str();

  Checkpoint ckpt;
  if (data.size() >= sizeof kMagic && std::memcmp(data.data(), kMagic, sizeof kMagic) == 0) {
    Reader r{data, sizeof kMagic};
    uint32_t version = r.u32();
    if (version != kVersion)
      throw IoError("unsupported checkpoint version " + std::to_string(version));
    uint64_t stored_hash = r.u64();
    ckpt.env_cfg.n_facts_per_video = r.u32();
    ckpt.env_cfg.fact_vocab_size = r.u32();
    ckpt.env_cfg.filler_vocab_size = r.u32();
    ckpt.env_cfg.n_options = r.u32();
    uint32_t n_kinds = r.u32();
    ckpt.env_cfg.question_kinds.clear();
    for (uint32_t i = 0; i < n_kinds; ++i)
      ckpt.env_cfg.question_kinds.push_back(r.u32() == 0 ? env::QuestionKind::slot
                                                         : env::QuestionKind::presence);
    ckpt.env_cfg.seed = r.u64();
    ckpt.trace_len = r.u32();
    policy::PolicyParams& p = ckpt.params;
    p.n_options = r.u32();
    p.w_lang = r.f64();
    p.w_vis = r.f64();
    p.dilution_kappa = r.f64();
    for (auto& row : p.lang_table)
      for (double& v : row) v = r.f64();
    for (auto& row : p.vis_table)
      for (double& v : row) v = r.f64();
    uint32_t n_answer = r.u32();
    p.answer_table.resize(n_answer);
    for (double& v : p.answer_table) v = r.f64();
    if (stored_hash != env::config_hash(ckpt.env_cfg))
      throw IoError("checkpoint env hash mismatch: " + path);
  } else {
    ojson j;
    try {
      j = ojson::parse(data);
    } catch (const nlohmann::json::parse_error& e) {
      throw IoError("checkpoint is neither binary nor JSON: " + std::string(e.what()));
    }
    if (j.value("format", "") != "ver-checkpoint")
      throw IoError("not a checkpoint file: " + path);
    if (j.at("version").get<uint32_t>() != kVersion)
      throw IoError("unsupported checkpoint version");
    ckpt.env_cfg = env_from_json(j.at("env"));
    if (j.at("env_hash").get<uint64_t>() != env::config_hash(ckpt.env_cfg))
      throw IoError("checkpoint env hash mismatch: " + path);
    ckpt.trace_len = j.at("trace_len").get<uint32_t>();
    const ojson& pol = j.at("policy");
    policy::PolicyParams& p = ckpt.params;
    p.n_options = pol.at("n_options").get<uint32_t>();
    p.w_lang = pol.at("w_lang").get<double>();
    p.w_vis = pol.at("w_vis").get<double>();
    p.dilution_kappa = pol.at("dilution_kappa").get<double>();
    const ojson& lang = pol.at("lang_table");
    for (size_t r2 = 0; r2 < p.lang_table.size(); ++r2)
      for (size_t c = 0; c < p.lang_table[r2].size(); ++c)
        p.lang_table[r2][c] = lang.at(r2).at(c).get<double>();
    const ojson& vis = pol.at("vis_table");
    for (size_t r2 = 0; r2 < p.vis_table.size(); ++r2)
      for (size_t c = 0; c < p.vis_table[r2].size(); ++c)
        p.vis_table[r2][c] = vis.at(r2).at(c).get<double>();
    p.answer_table = pol.at("answer_table").get<std::vector<double>>();
  }

  if (ckpt.params.answer_table.size() !=
      static_cast<size_t>(2 * policy::kNumKinds) * ckpt.params.n_options)
    throw IoError("checkpoint answer table size inconsistent with n_options");
  env::validate(ckpt.env_cfg);
  return ckpt;
}

}  // namespace ver::harness
