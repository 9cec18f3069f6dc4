#include "ver/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>

#include <json.hpp>

#include "ver/errors.hpp"

namespace ver::harness {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

MetricsWriter::MetricsWriter(const std::string& path, bool normalize_timestamps)
    : path_(path), normalize_(normalize_timestamps) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  out_.open(path, std::ios::app);
  if (!out_) throw IoError("cannot open metrics file for append: " + path);
}

void MetricsWriter::write(const MetricsRecord& rec) {
  ojson j;
  j["v"] = kMetricsSchemaVersion;
  j["label"] = rec.label;
  int64_t ts = rec.timestamp_ms;
  if (!normalize_ && ts == 0)
    ts = std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
             .count();
  j["ts"] = normalize_ ? 0 : ts;
  j["kind"] = rec.kind;
  for (const auto& [key, value] : rec.payload) j[key] = value;
  out_ << j.dump() << '\n';
  out_.flush();
  if (!out_) throw IoError("write to metrics file failed: " + path_);
}

std::vector<MetricsRecord> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file: " + path);
  std::vector<MetricsRecord> out;
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);

  for (size_t i = 0; i < lines.size(); ++i) {
    ojson j;
    try {
      j = ojson::parse(lines[i]);
    } catch (const nlohmann::json::parse_error&) {
      if (i + 1 == lines.size()) break;  // torn trailing line, drop it
      throw IoError("malformed metrics line " + std::to_string(i + 1) + " in " + path);
    }
    MetricsRecord rec;
    rec.label = j.value("label", "");
    rec.timestamp_ms = j.value("ts", static_cast<int64_t>(0));
    rec.kind = j.value("kind", "");
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "v" || it.key() == "label" || it.key() == "ts" || it.key() == "kind")
        continue;
      if (it.value().is_number()) rec.payload.emplace_back(it.key(), it.value().get<double>());
    }
    out.push_back(rec);
  }
  return out;
}

std::string emit_summary(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  struct Row {
    std::string label;
    MetricsRecord last;
  };
  std::vector<Row> rows;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    const std::string suffix = ".train.jsonl";
    if (name.size() <= suffix.size() ||
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
      continue;
    auto records = read_metrics(entry.path().string());
    MetricsRecord last;
    bool found = false;
    for (const auto& rec : records)
      if (rec.kind == "train_iter") {
        last = rec;
        found = true;
      }
    if (found) rows.push_back({last.label, last});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.label < b.label; });

  const char* columns[] = {"iter",     "mean_reward", "clip_frac",
                           "kl",       "accuracy",    "grounding_rate"};
  std::string csv = "label";
  for (const char* c : columns) csv += std::string(",") + c;
  csv += '\n';
  for (const Row& row : rows) {
    csv += row.label;
    for (const char* c : columns) {
      csv += ',';
      bool present = false;
      for (const auto& [key, value] : row.last.payload)
        if (key == c) {
          ojson v = value;
          csv += v.dump();
          present = true;
          break;
        }
      if (!present) csv += "nan";
    }
    csv += '\n';
  }

  fs::path out_path = fs::path(dir) / "summary.csv";
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw IoError("cannot write summary: " + out_path.string());
  out << csv;
  return out_path.string();
}

}  // namespace ver::harness
