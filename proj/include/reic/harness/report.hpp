#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "reic/harness/config.hpp"

namespace reic::harness {

struct RunReport {
  std::string experiment;
  int recipe_version = 0;
  std::string config_digest;
  /// Sorted by key. Values are numbers, strings or arrays of numbers.
  Json metrics = Json::object();
  std::vector<std::string> manifest;
  double wall_time = 0.0;  // s

  bool operator==(const RunReport&) const = default;
};

enum class ReportFormat { json, text };

inline std::string emit_report(const RunReport& r, ReportFormat format = ReportFormat::json) {
  if (format == ReportFormat::json) {
    nlohmann::ordered_json j;
    j["experiment"] = r.experiment;
    j["recipe_version"] = r.recipe_version;
    j["config_digest"] = r.config_digest;
    j["metrics"] = r.metrics;
    j["manifest"] = r.manifest;
    j["wall_time_s"] = r.wall_time;
    return j.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "experiment: " << r.experiment << "\n";
  out << "recipe_version: " << r.recipe_version << "\n";
  out << "config_digest: " << r.config_digest << "\n";
  out << "metrics:\n";
  for (auto it = r.metrics.begin(); it != r.metrics.end(); ++it)
    out << "  " << it.key() << ": " << it.value().dump() << "\n";
  out << "manifest:\n";
  for (const auto& f : r.manifest) out << "  " << f << "\n";
  out << "wall_time_s: " << r.wall_time << "\n";
  return out.str();
}

inline RunReport parse_report(const std::string& text) {
  const Json j = Json::parse(text);
  RunReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.recipe_version = j.at("recipe_version").get<int>();
  r.config_digest = j.at("config_digest").get<std::string>();
  r.metrics = j.at("metrics");
  r.manifest = j.at("manifest").get<std::vector<std::string>>();
  r.wall_time = j.at("wall_time_s").get<double>();
  return r;
}

/// Metrics only, serialized canonically; the determinism check compares these.
inline std::string metrics_fingerprint(const RunReport& r) { return r.metrics.dump(); }

}  // namespace reic::harness
