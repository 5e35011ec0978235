#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "fsd/clock.hpp"
#include "fsd/engine.hpp"
#include "fsd/geomatch.hpp"
#include "fsd/harness/config.hpp"
#include "fsd/harness/reference_pipeline.hpp"
#include "fsd/harness/scenario.hpp"

namespace fsd::harness {

struct RunReport {
  /// Sorted by (at_ms, kind, question_id, candidate_id).
  std::vector<geomatch::ActionEvent> log;
  ConservationReport conservation;
  std::map<std::string, std::uint64_t> processed;
  /// Decision time minus question creation time, one entry per log record.
  std::vector<std::int64_t> latencies_ms;
  std::uint64_t decisions = 0;
  std::int64_t end_ms = 0;
};

inline std::string format_action_log(
    const std::vector<geomatch::ActionEvent>& log) {
  std::string out;
  for (const geomatch::ActionEvent& e : log) {
    out += geomatch::format_action(e);
    out += '\n';
  }
  return out;
}

/// Deterministic simulated-clock replay of a scenario through the reference
/// pipeline. The clock steps through every dehydrator wake time, so parked
/// questions re-match at the exact millisecond they are due; wakes at an
/// event's timestamp settle before the event itself is fed.
inline RunReport replay(const Scenario& scenario, const HarnessConfig& cfg) {
  Clock clock(ClockMode::Simulated);
  ReferencePipeline pipeline(cfg.match, clock);
  Engine<GeoPayload>& engine = pipeline.engine();

  for (const ScenarioEvent& ev : scenario.events) {
    if (const auto* qe = std::get_if<QuestionEvent>(&ev)) {
      engine.advance_to(qe->q.created_ms);
      pipeline.submit_question(qe->q);
      engine.run_until_idle();
    } else if (const auto* ce = std::get_if<CandidateEvent>(&ev)) {
      engine.advance_to(ce->c.reported_ms);
      pipeline.submit_candidate(ce->c);
      engine.run_until_idle();
    } else if (const auto* ae = std::get_if<AnswerEvent>(&ev)) {
      engine.advance_to(ae->t_ms);
      pipeline.submit_answer(
          geomatch::Answer{ae->question_id, ae->candidate_id}, ae->t_ms);
      engine.run_until_idle();
    } else if (const auto* te = std::get_if<AdvanceEvent>(&ev)) {
      engine.advance_to(clock.now_ms() + te->delta_ms);
    }
  }
  engine.run_until_idle();

  RunReport report;
  report.log = pipeline.state().log;
  std::stable_sort(report.log.begin(), report.log.end(),
                   geomatch::action_before);
  report.conservation = engine.conservation();
  report.processed = engine.processed_total();
  report.latencies_ms = pipeline.state().latencies_ms;
  report.decisions = pipeline.state().decisions;
  report.end_ms = clock.now_ms();
  return report;
}

}  // namespace fsd::harness
