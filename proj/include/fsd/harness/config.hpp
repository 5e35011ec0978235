#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>

#include "fsd/errors.hpp"
#include "fsd/geomatch.hpp"

namespace fsd::harness {

/// Everything the replay/oracle/bench runs can be tuned with. Field
/// defaults match the documented knob defaults; a config file overrides
/// them.
struct HarnessConfig {
  geomatch::GeoMatchConfig match;
};

namespace detail {

[[noreturn]] inline void config_fail(std::size_t line_no,
                                     const std::string& what) {
  raise(Errc::ConfigError, "line " + std::to_string(line_no) + ": " + what);
}

inline double config_double(const std::string& value, std::size_t line_no,
                            const std::string& key) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double parsed = std::strtod(begin, &end);
  if (value.empty() || end != begin + value.size())
    config_fail(line_no, "bad numeric value for " + key);
  return parsed;
}

inline std::int64_t config_int(const std::string& value, std::size_t line_no,
                               const std::string& key) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const long long parsed = std::strtoll(begin, &end, 10);
  if (value.empty() || end != begin + value.size())
    config_fail(line_no, "bad integer value for " + key);
  return static_cast<std::int64_t>(parsed);
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
    --e;
  return s.substr(b, e - b);
}

}  // namespace detail

/// Parses flat `key = value` lines. '#' starts a comment; blank lines are
/// skipped. Unknown keys and malformed values raise ConfigError with the
/// line number.
///
/// Keys and defaults:
///   dehydrator.base_interval_ms = 1000
///   dehydrator.backoff_factor   = 2.0
///   dehydrator.max_interval_ms  = 60000
///   dehydrator.max_age_ms       = 900000
///   dehydrator.max_retries      = none
///   geomatch.edge_band_frac     = 0.1
///   geomatch.edge_band_m        = none   (absolute width overrides frac)
///   geomatch.max_update_requests = 3
///   limiter.capacity            = 3
///   limiter.refill_interval_ms  = 60000
///   rtree.inflation_factor      = 1.0    (test hook; < 1 breaks matching)
///   rtree.node_capacity         = 16
inline HarnessConfig parse_config(const std::string& text) {
  HarnessConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string line = text.substr(
        pos, eol == std::string::npos ? std::string::npos : eol - pos);
    pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (detail::trim(line).empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      detail::config_fail(line_no, "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) detail::config_fail(line_no, "empty key");

    auto& m = cfg.match;
    if (key == "dehydrator.base_interval_ms") {
      m.dehydration.base_interval_ms = detail::config_int(value, line_no, key);
    } else if (key == "dehydrator.backoff_factor") {
      m.dehydration.backoff_factor = detail::config_double(value, line_no, key);
    } else if (key == "dehydrator.max_interval_ms") {
      m.dehydration.max_interval_ms = detail::config_int(value, line_no, key);
    } else if (key == "dehydrator.max_age_ms") {
      m.dehydration.max_age_ms = detail::config_int(value, line_no, key);
    } else if (key == "dehydrator.max_retries") {
      if (value == "none")
        m.dehydration.max_retries.reset();
      else
        m.dehydration.max_retries = static_cast<std::uint32_t>(
            detail::config_int(value, line_no, key));
    } else if (key == "geomatch.edge_band_frac") {
      m.edge_band_frac = detail::config_double(value, line_no, key);
    } else if (key == "geomatch.edge_band_m") {
      if (value == "none")
        m.edge_band_m.reset();
      else
        m.edge_band_m = detail::config_double(value, line_no, key);
    } else if (key == "geomatch.max_update_requests") {
      m.max_update_requests = static_cast<std::size_t>(
          detail::config_int(value, line_no, key));
    } else if (key == "limiter.capacity") {
      m.limiter_capacity = static_cast<std::uint32_t>(
          detail::config_int(value, line_no, key));
    } else if (key == "limiter.refill_interval_ms") {
      m.limiter_refill_ms = detail::config_int(value, line_no, key);
    } else if (key == "rtree.inflation_factor") {
      m.rtree_inflation = detail::config_double(value, line_no, key);
    } else if (key == "rtree.node_capacity") {
      m.rtree_node_capacity = static_cast<std::size_t>(
          detail::config_int(value, line_no, key));
    } else {
      detail::config_fail(line_no, "unknown key '" + key + "'");
    }
  }
  try {
    cfg.match.dehydration.validate();
  } catch (const Error& err) {
    raise(Errc::ConfigError, err.what());
  }
  return cfg;
}

}  // namespace fsd::harness
