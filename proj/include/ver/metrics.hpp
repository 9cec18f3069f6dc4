#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace ver::harness {

inline constexpr int kMetricsSchemaVersion = 1;

// One JSONL record. Payload keys keep insertion order on write.
struct MetricsRecord {
  std::string label;
  int64_t timestamp_ms = 0;  // unix millis; 0 when normalization is on
  std::string kind;          // train_iter | eval | drift_point
  std::vector<std::pair<std::string, double>> payload;
};

// Append-only JSONL writer, flushed per record so a crash never loses
// acknowledged records.
class MetricsWriter {
public:
  // normalize_timestamps pins the ts field to 0 so repeated runs are
  // byte-comparable.
  MetricsWriter(const std::string& path, bool normalize_timestamps);
  void write(const MetricsRecord& rec);
  const std::string& path() const { return path_; }

private:
  std::string path_;
  std::ofstream out_;
  bool normalize_;
};

// Reads a JSONL metrics file. A malformed *final* line (torn write from a
// crash) is dropped; malformed interior lines are an error.
std::vector<MetricsRecord> read_metrics(const std::string& path);

// Aggregates the final train_iter record of every *.train.jsonl under dir
// into dir/summary.csv, one row per run, sorted by label. Idempotent.
std::string emit_summary(const std::string& dir);

}  // namespace ver::harness
