#include "retaug/report.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "retaug/common.hpp"

namespace retaug {

using nlohmann::json;

void ExperimentReport::finalize() {
  std::vector<double> t, s;
  for (const auto& r : seeds) {
    t.push_back(r.teacher_acc);
    s.push_back(r.student_acc);
  }
  if (!seeds.empty()) {
    teacher_mean = mean_of(t);
    teacher_std = pop_std(t);
    student_mean = mean_of(s);
    student_std = pop_std(s);
  }
}

std::string ExperimentReport::to_json() const {
  json j;
  j["protocol"] = protocol;
  j["config"] = config_snapshot;

  json jseeds = json::array();
  for (const auto& r : seeds) {
    json e{{"seed", r.seed}, {"teacher_acc", r.teacher_acc}, {"student_acc", r.student_acc}};
    for (const auto& [k, v] : r.extra) e[k] = v;
    jseeds.push_back(std::move(e));
  }
  j["seeds"] = std::move(jseeds);
  j["aggregates"] = {{"teacher_mean", teacher_mean},
                     {"teacher_std", teacher_std},
                     {"student_mean", student_mean},
                     {"student_std", student_std}};

  json shorts = json::array();
  for (const auto& s : shortfalls)
    shorts.push_back({{"label", s.label}, {"quota", s.quota}, {"available", s.available}});
  j["provenance"] = {{"pool_size", pool_size},
                     {"filtered_size", filtered_size},
                     {"shortfalls", std::move(shorts)},
                     {"leakage_checked", leakage_checked},
                     {"leakage_overlap", leakage_overlap}};

  if (!metrics.empty()) j["metrics"] = metrics;

  if (!few_shot.empty()) {
    json variants = json::array();
    for (const auto& v : few_shot) {
      json runs = json::array();
      for (const auto& r : v.runs)
        runs.push_back({{"train_set", r.train_set},
                        {"seed", r.seed},
                        {"valid_acc", r.valid_acc},
                        {"test_acc", r.test_acc},
                        {"selected", r.selected}});
      variants.push_back({{"name", v.name},
                          {"runs", std::move(runs)},
                          {"per_set_score", v.per_set_score},
                          {"mean", v.mean},
                          {"std", v.stddev}});
    }
    j["few_shot"] = std::move(variants);
  }

  j["timings_sec"] = timings_sec;
  return j.dump(2);
}

std::string ExperimentReport::summary_table() const {
  std::string out;
  char line[160];
  auto row = [&](const char* k, const std::string& v) {
    std::snprintf(line, sizeof line, "  %-22s %s\n", k, v.c_str());
    out += line;
  };
  auto num = [](double v) {
    char b[48];
    std::snprintf(b, sizeof b, "%.4f", v);
    return std::string(b);
  };

  out += "experiment summary\n";
  row("protocol", protocol);
  if (!seeds.empty()) {
    row("seeds", std::to_string(seeds.size()));
    row("teacher mean/std", num(teacher_mean) + " / " + num(teacher_std));
    row("student mean/std", num(student_mean) + " / " + num(student_std));
    for (const auto& r : seeds) {
      std::snprintf(line, sizeof line, "  seed %-17llu teacher %s  student %s\n",
                    (unsigned long long)r.seed, num(r.teacher_acc).c_str(),
                    num(r.student_acc).c_str());
      out += line;
    }
  }
  for (const auto& v : few_shot) {
    row(("few-shot " + v.name).c_str(), num(v.mean) + " / " + num(v.stddev));
    std::string scores;
    for (std::size_t i = 0; i < v.per_set_score.size(); ++i)
      scores += (i ? " " : "") + num(v.per_set_score[i]);
    row("  per-set scores", scores);
  }
  row("pool size", std::to_string(pool_size));
  row("filtered size", std::to_string(filtered_size));
  if (!shortfalls.empty()) row("shortfall classes", std::to_string(shortfalls.size()));
  row("leakage overlap",
      leakage_checked ? std::to_string(leakage_overlap) : std::string("unchecked"));
  for (const auto& [k, v] : metrics) row(k.c_str(), num(v));
  return out;
}

void ExperimentReport::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << to_json() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

StopWatch::StopWatch() {
  start_ns_ = std::uint64_t(
      std::chrono::steady_clock::now().time_since_epoch().count());
}

double StopWatch::seconds() const {
  auto now = std::uint64_t(std::chrono::steady_clock::now().time_since_epoch().count());
  return double(now - start_ns_) *
         double(std::chrono::steady_clock::period::num) /
         double(std::chrono::steady_clock::period::den);
}

}  // namespace retaug
