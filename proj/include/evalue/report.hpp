#pragma once

// Experiment reports. A report is a JSON document:
//
//   {
//     "format": "evalue-report", "format_version": 1,
//     "protocol": "...", "generator": "...",
//     "config": {...},                       // enough to rerun the command
//     "per_seed": [{"seed": s, "metrics": {name: value}, "rows": [...]}],
//     "aggregate": {name: {"mean": m, "std": sd, "count": k}},
//     "notes": {...}
//   }
//
// Metrics whose name starts with "time_" are wall-clock measurements and are
// the only fields allowed to differ between reruns. The flat CSV companion has
// columns seed,step_or_repeat,metric,value.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "evalue/error.hpp"
#include "json.hpp"

namespace evalue::benchlab {

using Json = nlohmann::ordered_json;

inline constexpr int kReportFormatVersion = 1;

struct TableRow {
  std::int64_t step_or_repeat = 0;
  std::string metric;
  double value = 0.0;
};

struct SeedEntry {
  std::int64_t seed = 0;
  std::map<std::string, double> metrics;
  std::vector<TableRow> rows;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single seed
  std::size_t count = 0;
};

inline bool is_timing_metric(const std::string& name) { return name.rfind("time_", 0) == 0; }

inline Aggregate aggregate_of(const std::vector<double>& values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  double total = 0.0;
  for (double v : values) total += v;
  a.mean = total / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

struct ExperimentReport {
  std::string protocol;
  Json config = Json::object();
  std::vector<SeedEntry> per_seed;
  std::map<std::string, Aggregate> aggregate;
  std::string generator;
  Json notes = Json::object();
  int format_version = kReportFormatVersion;

  // Recomputes aggregates over metrics present in every seed entry.
  void finalize() {
    aggregate.clear();
    if (per_seed.empty()) return;
    for (const auto& [name, unused] : per_seed.front().metrics) {
      std::vector<double> values;
      for (const auto& entry : per_seed) {
        const auto it = entry.metrics.find(name);
        if (it == entry.metrics.end()) break;
        values.push_back(it->second);
      }
      if (values.size() == per_seed.size()) aggregate[name] = aggregate_of(values);
    }
  }

  void validate() const {
    for (const auto& [name, agg] : aggregate) {
      std::vector<double> values;
      for (const auto& entry : per_seed) {
        const auto it = entry.metrics.find(name);
        if (it == entry.metrics.end()) {
          throw Error(ErrorCode::kInvalidArgument,
                      "aggregate " + name + " has no per-seed value for seed " +
                          std::to_string(entry.seed));
        }
        values.push_back(it->second);
      }
      const Aggregate fresh = aggregate_of(values);
      if (fresh.count != agg.count || std::abs(fresh.mean - agg.mean) > 1e-12 ||
          std::abs(fresh.std - agg.std) > 1e-12) {
        throw Error(ErrorCode::kInvalidArgument,
                    "aggregate " + name + " does not match its per-seed entries");
      }
    }
  }

  Json to_json() const {
    Json j;
    j["format"] = "evalue-report";
    j["format_version"] = format_version;
    j["protocol"] = protocol;
    j["generator"] = generator;
    j["config"] = config;
    Json seeds = Json::array();
    for (const auto& entry : per_seed) {
      Json e;
      e["seed"] = entry.seed;
      e["metrics"] = Json::object();
      for (const auto& [name, value] : entry.metrics) e["metrics"][name] = value;
      Json rows = Json::array();
      for (const auto& row : entry.rows) {
        rows.push_back({{"step_or_repeat", row.step_or_repeat},
                        {"metric", row.metric},
                        {"value", row.value}});
      }
      e["rows"] = std::move(rows);
      seeds.push_back(std::move(e));
    }
    j["per_seed"] = std::move(seeds);
    j["aggregate"] = Json::object();
    for (const auto& [name, agg] : aggregate) {
      j["aggregate"][name] = {{"mean", agg.mean}, {"std", agg.std}, {"count", agg.count}};
    }
    j["notes"] = notes;
    return j;
  }

  static ExperimentReport from_json(const Json& j) {
    if (j.value("format", "") != "evalue-report") {
      throw Error(ErrorCode::kParse, "not an evalue report");
    }
    ExperimentReport r;
    r.format_version = j.at("format_version").get<int>();
    if (r.format_version != kReportFormatVersion) {
      throw Error(ErrorCode::kUnsupportedVersion,
                  "report format version " + std::to_string(r.format_version));
    }
    r.protocol = j.at("protocol").get<std::string>();
    r.generator = j.at("generator").get<std::string>();
    r.config = j.at("config");
    r.notes = j.value("notes", Json::object());
    for (const auto& e : j.at("per_seed")) {
      SeedEntry entry;
      entry.seed = e.at("seed").get<std::int64_t>();
      for (const auto& [name, value] : e.at("metrics").items()) entry.metrics[name] = value.get<double>();
      for (const auto& row : e.at("rows")) {
        entry.rows.push_back({row.at("step_or_repeat").get<std::int64_t>(),
                              row.at("metric").get<std::string>(), row.at("value").get<double>()});
      }
      r.per_seed.push_back(std::move(entry));
    }
    for (const auto& [name, agg] : j.at("aggregate").items()) {
      r.aggregate[name] = {agg.at("mean").get<double>(), agg.at("std").get<double>(),
                           agg.at("count").get<std::size_t>()};
    }
    return r;
  }

  std::string csv_table() const {
    std::string out = "seed,step_or_repeat,metric,value\n";
    char buf[64];
    for (const auto& entry : per_seed) {
      for (const auto& row : entry.rows) {
        std::snprintf(buf, sizeof buf, "%.17g", row.value);
        out += std::to_string(entry.seed) + "," + std::to_string(row.step_or_repeat) + "," +
               row.metric + "," + buf + "\n";
      }
    }
    return out;
  }

  // One line: protocol name and the aggregate means.
  std::string summary_line() const {
    std::string line = protocol;
    char buf[96];
    for (const auto& [name, agg] : aggregate) {
      std::snprintf(buf, sizeof buf, " %s=%.6g", name.c_str(), agg.mean);
      line += buf;
      if (agg.count > 1) {
        std::snprintf(buf, sizeof buf, "(+-%.3g)", agg.std);
        line += buf;
      }
    }
    return line;
  }

  void write(const std::filesystem::path& json_path,
             const std::filesystem::path& csv_path = {}) const {
    validate();
    {
      std::ofstream out(json_path, std::ios::trunc);
      if (!out) throw Error(ErrorCode::kIo, "cannot write " + json_path.string());
      out << to_json().dump(2) << "\n";
    }
    if (!csv_path.empty()) {
      std::ofstream out(csv_path, std::ios::trunc);
      if (!out) throw Error(ErrorCode::kIo, "cannot write " + csv_path.string());
      out << csv_table();
    }
  }

  static ExperimentReport read(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open " + json_path.string());
    try {
      return from_json(Json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, json_path.string() + ": " + e.what());
    }
  }
};

}  // namespace evalue::benchlab
