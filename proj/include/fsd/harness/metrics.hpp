#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"

namespace fsd::harness {

struct Metric {
  std::string name;
  double value = 0.0;
  std::string unit;
};

inline std::string format_metric_value(double value) {
  if (std::floor(value) == value && std::abs(value) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", value);
    return buf;
  }
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

inline std::string metrics_csv(const std::vector<Metric>& metrics) {
  std::string out = "name,value,unit\n";
  for (const Metric& m : metrics) {
    out += m.name;
    out += ',';
    out += format_metric_value(m.value);
    out += ',';
    out += m.unit;
    out += '\n';
  }
  return out;
}

inline std::string metrics_jsonl(const std::vector<Metric>& metrics) {
  std::string out;
  for (const Metric& m : metrics) {
    nlohmann::json record;
    record["name"] = m.name;
    record["unit"] = m.unit;
    if (std::floor(m.value) == m.value && std::abs(m.value) < 1e15)
      record["value"] = static_cast<std::int64_t>(m.value);
    else
      record["value"] = m.value;
    out += record.dump();
    out += '\n';
  }
  return out;
}

/// Nearest-rank percentile, p in [0, 100]. Sorts a copy.
inline double percentile(std::vector<double> samples, double p) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  if (p <= 0.0) return samples.front();
  if (p >= 100.0) return samples.back();
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(p / 100.0 * static_cast<double>(samples.size())));
  return samples[rank == 0 ? 0 : rank - 1];
}

}  // namespace fsd::harness
