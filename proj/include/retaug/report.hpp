#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "retaug/augment.hpp"

namespace retaug {

struct SeedResult {
  std::uint64_t seed = 0;
  double teacher_acc = 0.0;
  double student_acc = 0.0;
  std::map<std::string, double> extra;  // protocol-specific scalars
};

// One (train set, init seed) run of the few-shot protocol.
struct FewShotRun {
  int train_set = 0;
  std::uint64_t seed = 0;
  double valid_acc = 0.0;
  double test_acc = 0.0;
  bool selected = false;  // among the top models by validation accuracy
};

struct FewShotVariantLog {
  std::string name;  // "baseline" | "self_trained"
  std::vector<FewShotRun> runs;
  std::vector<double> per_set_score;  // mean test accuracy of the selected models
  double mean = 0.0;
  double stddev = 0.0;
};

// Everything a pipeline run produced, serializable as one JSON document.
// Timing entries are wall-clock and are the only nondeterministic fields.
struct ExperimentReport {
  std::string protocol;
  std::string config_snapshot;

  std::vector<SeedResult> seeds;
  double teacher_mean = 0.0, teacher_std = 0.0;
  double student_mean = 0.0, student_std = 0.0;

  std::uint64_t pool_size = 0;
  std::uint64_t filtered_size = 0;
  std::vector<ClassShortfall> shortfalls;
  bool leakage_checked = false;
  std::uint64_t leakage_overlap = 0;

  std::map<std::string, double> metrics;  // protocol-specific aggregates
  std::vector<FewShotVariantLog> few_shot;
  std::map<std::string, double> timings_sec;

  // Recomputes the teacher/student aggregates from `seeds`.
  void finalize();

  std::string to_json() const;  // pretty-printed document
  std::string summary_table() const;
  void save(const std::string& path) const;
};

// Seconds-resolution helper for the timing entries.
class StopWatch {
 public:
  StopWatch();
  double seconds() const;

 private:
  std::uint64_t start_ns_ = 0;
};

}  // namespace retaug
