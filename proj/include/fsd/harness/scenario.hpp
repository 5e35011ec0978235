#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <variant>
#include <vector>

#include "fsd/errors.hpp"
#include "fsd/geomatch.hpp"

namespace fsd::harness {

struct QuestionEvent {
  geomatch::Question q;
};

struct CandidateEvent {
  geomatch::CandidateLocation c;
};

struct AnswerEvent {
  std::string question_id;
  std::string candidate_id;
  std::int64_t t_ms = 0;
};

struct AdvanceEvent {
  std::int64_t delta_ms = 0;
};

using ScenarioEvent =
    std::variant<QuestionEvent, CandidateEvent, AnswerEvent, AdvanceEvent>;

struct Scenario {
  std::vector<ScenarioEvent> events;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

[[noreturn]] inline void parse_fail(std::size_t line_no,
                                    const std::string& what) {
  raise(Errc::ParseError, "line " + std::to_string(line_no) + ": " + what);
}

inline double parse_double(const std::string& field, std::size_t line_no,
                           const char* name) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end != begin + field.size() || field.empty())
    parse_fail(line_no, std::string("bad ") + name + " '" + field + "'");
  return value;
}

inline std::int64_t parse_int(const std::string& field, std::size_t line_no,
                              const char* name) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const long long value = std::strtoll(begin, &end, 10);
  if (end != begin + field.size() || field.empty())
    parse_fail(line_no, std::string("bad ") + name + " '" + field + "'");
  return static_cast<std::int64_t>(value);
}

inline std::string format_coord(double deg) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", deg);
  return buf;
}

}  // namespace detail

/// Parses the line-oriented scenario grammar:
///   Q id lat lon radius_m t_ms max_age_ms
///   C id lat lon t_ms
///   A question_id candidate_id t_ms
///   T delta_ms
/// '#' starts a comment; blank lines are skipped. Events must be listed in
/// non-decreasing time; T advances must be non-negative; question ids must
/// be unique. Violations raise ParseError with the line number.
inline Scenario parse_scenario(const std::string& text) {
  Scenario scenario;
  std::int64_t cursor_ms = 0;
  std::vector<std::string> seen_questions;
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
    const auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    const std::string& tag = fields[0];

    if (tag == "Q") {
      if (fields.size() != 7)
        detail::parse_fail(line_no, "Q takes 6 fields, got " +
                                        std::to_string(fields.size() - 1));
      geomatch::Question q;
      q.question_id = fields[1];
      q.lat_deg = detail::parse_double(fields[2], line_no, "latitude");
      q.lon_deg = detail::parse_double(fields[3], line_no, "longitude");
      q.radius_m = detail::parse_double(fields[4], line_no, "radius");
      q.created_ms = detail::parse_int(fields[5], line_no, "time");
      q.max_age_ms = detail::parse_int(fields[6], line_no, "max_age");
      try {
        geomatch::validate_question(q);
      } catch (const Error& err) {
        detail::parse_fail(line_no, err.what());
      }
      for (const auto& id : seen_questions)
        if (id == q.question_id)
          detail::parse_fail(line_no,
                             "duplicate question id '" + q.question_id + "'");
      seen_questions.push_back(q.question_id);
      if (q.created_ms < cursor_ms)
        detail::parse_fail(line_no, "time regression");
      cursor_ms = q.created_ms;
      scenario.events.push_back(QuestionEvent{std::move(q)});
    } else if (tag == "C") {
      if (fields.size() != 5)
        detail::parse_fail(line_no, "C takes 4 fields, got " +
                                        std::to_string(fields.size() - 1));
      geomatch::CandidateLocation c;
      c.candidate_id = fields[1];
      c.lat_deg = detail::parse_double(fields[2], line_no, "latitude");
      c.lon_deg = detail::parse_double(fields[3], line_no, "longitude");
      c.reported_ms = detail::parse_int(fields[4], line_no, "time");
      try {
        geomatch::validate_candidate(c);
      } catch (const Error& err) {
        detail::parse_fail(line_no, err.what());
      }
      if (c.reported_ms < cursor_ms)
        detail::parse_fail(line_no, "time regression");
      cursor_ms = c.reported_ms;
      scenario.events.push_back(CandidateEvent{std::move(c)});
    } else if (tag == "A") {
      if (fields.size() != 4)
        detail::parse_fail(line_no, "A takes 3 fields, got " +
                                        std::to_string(fields.size() - 1));
      AnswerEvent a;
      a.question_id = fields[1];
      a.candidate_id = fields[2];
      a.t_ms = detail::parse_int(fields[3], line_no, "time");
      if (a.t_ms < cursor_ms) detail::parse_fail(line_no, "time regression");
      cursor_ms = a.t_ms;
      scenario.events.push_back(a);
    } else if (tag == "T") {
      if (fields.size() != 2)
        detail::parse_fail(line_no, "T takes 1 field, got " +
                                        std::to_string(fields.size() - 1));
      AdvanceEvent adv;
      adv.delta_ms = detail::parse_int(fields[1], line_no, "delta");
      if (adv.delta_ms < 0) detail::parse_fail(line_no, "negative advance");
      cursor_ms += adv.delta_ms;
      scenario.events.push_back(adv);
    } else {
      detail::parse_fail(line_no, "unknown event tag '" + tag + "'");
    }
  }
  return scenario;
}

/// Canonical text for a scenario; parse_scenario round-trips it.
inline std::string format_scenario(const Scenario& scenario) {
  std::string out;
  for (const ScenarioEvent& ev : scenario.events) {
    if (const auto* qe = std::get_if<QuestionEvent>(&ev)) {
      const auto& q = qe->q;
      out += "Q " + q.question_id + ' ' + detail::format_coord(q.lat_deg) +
             ' ' + detail::format_coord(q.lon_deg) + ' ' +
             detail::format_coord(q.radius_m) + ' ' +
             std::to_string(q.created_ms) + ' ' +
             std::to_string(q.max_age_ms) + '\n';
    } else if (const auto* ce = std::get_if<CandidateEvent>(&ev)) {
      const auto& c = ce->c;
      out += "C " + c.candidate_id + ' ' + detail::format_coord(c.lat_deg) +
             ' ' + detail::format_coord(c.lon_deg) + ' ' +
             std::to_string(c.reported_ms) + '\n';
    } else if (const auto* ae = std::get_if<AnswerEvent>(&ev)) {
      out += "A " + ae->question_id + ' ' + ae->candidate_id + ' ' +
             std::to_string(ae->t_ms) + '\n';
    } else if (const auto* te = std::get_if<AdvanceEvent>(&ev)) {
      out += "T " + std::to_string(te->delta_ms) + '\n';
    }
  }
  return out;
}

/// Scenario end time: the largest event time after applying every advance.
inline std::int64_t scenario_end_ms(const Scenario& scenario) {
  std::int64_t cursor = 0;
  for (const ScenarioEvent& ev : scenario.events) {
    if (const auto* qe = std::get_if<QuestionEvent>(&ev))
      cursor = qe->q.created_ms;
    else if (const auto* ce = std::get_if<CandidateEvent>(&ev))
      cursor = ce->c.reported_ms;
    else if (const auto* ae = std::get_if<AnswerEvent>(&ev))
      cursor = ae->t_ms;
    else if (const auto* te = std::get_if<AdvanceEvent>(&ev))
      cursor += te->delta_ms;
  }
  return cursor;
}

}  // namespace fsd::harness
