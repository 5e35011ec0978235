#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "fsd/geo.hpp"
#include "fsd/geomatch.hpp"
#include "fsd/harness/config.hpp"
#include "fsd/harness/replay.hpp"
#include "fsd/harness/scenario.hpp"

namespace fsd::harness {

/// Reference model for oracle_check: a flat, index-free replay of the same
/// scenario semantics. No R-tree (every match is a full haversine scan over
/// all stored locations), no engine, no time-indexed store (wakes live in a
/// plain ordered set). Kept deliberately separate from the pipeline code so
/// drift in either shows up as a log diff.
class OracleModel {
 public:
  explicit OracleModel(const HarnessConfig& cfg) : cfg_(cfg.match) {}

  std::vector<geomatch::ActionEvent> run(const Scenario& scenario) {
    for (const ScenarioEvent& ev : scenario.events) {
      if (const auto* qe = std::get_if<QuestionEvent>(&ev)) {
        settle_until(qe->q.created_ms);
        on_question(qe->q);
      } else if (const auto* ce = std::get_if<CandidateEvent>(&ev)) {
        settle_until(ce->c.reported_ms);
        on_candidate(ce->c);
      } else if (const auto* ae = std::get_if<AnswerEvent>(&ev)) {
        settle_until(ae->t_ms);
        on_answer(*ae);
      } else if (const auto* te = std::get_if<AdvanceEvent>(&ev)) {
        settle_until(cursor_ms_ + te->delta_ms);
      }
    }
    std::stable_sort(log_.begin(), log_.end(), geomatch::action_before);
    return log_;
  }

 private:
  struct LiveQuestion {
    geomatch::Question q;
    std::uint32_t retries = 0;
  };

  struct Bucket {
    std::uint32_t tokens = 0;
    std::int64_t window_start_ms = 0;
  };

  // Same schedule arithmetic as the store, written out locally.
  std::int64_t wake_interval(std::uint32_t retries) const {
    const auto& p = cfg_.dehydration;
    const double raw =
        static_cast<double>(p.base_interval_ms) *
        std::pow(p.backoff_factor, static_cast<double>(retries));
    if (!(raw < static_cast<double>(p.max_interval_ms)))
      return p.max_interval_ms;
    return static_cast<std::int64_t>(raw);
  }

  bool consume_token(const std::string& candidate_id, std::int64_t now_ms) {
    auto it = buckets_.find(candidate_id);
    if (it == buckets_.end()) {
      Bucket fresh{cfg_.limiter_capacity, now_ms};
      it = buckets_.emplace(candidate_id, fresh).first;
    } else {
      Bucket& b = it->second;
      if (now_ms >= b.window_start_ms + cfg_.limiter_refill_ms) {
        const std::int64_t elapsed = now_ms - b.window_start_ms;
        b.window_start_ms +=
            (elapsed / cfg_.limiter_refill_ms) * cfg_.limiter_refill_ms;
        b.tokens = cfg_.limiter_capacity;
      }
    }
    if (it->second.tokens == 0) return false;
    --it->second.tokens;
    return true;
  }

  bool pair_sent(const std::string& qid, const std::string& cid) const {
    return sent_.count(qid + '\x1f' + cid) != 0;
  }

  void mark_pair(const std::string& qid, const std::string& cid) {
    sent_.insert(qid + '\x1f' + cid);
  }

  struct Hit {
    geomatch::CandidateLocation loc;
    double distance_m;
  };

  // Full scan: every stored location, exact haversine.
  void scan(const geomatch::Question& q, double band_m,
            std::vector<Hit>& inside, std::vector<Hit>& near_edge) const {
    for (const auto& [cid, loc] : locations_) {
      const double d =
          geo::haversine_m(q.lat_deg, q.lon_deg, loc.lat_deg, loc.lon_deg);
      if (d <= q.radius_m)
        inside.push_back(Hit{loc, d});
      else if (d <= q.radius_m + band_m)
        near_edge.push_back(Hit{loc, d});
    }
    auto order = [](const Hit& a, const Hit& b) {
      if (a.distance_m != b.distance_m) return a.distance_m < b.distance_m;
      return a.loc.candidate_id < b.loc.candidate_id;
    };
    std::sort(inside.begin(), inside.end(), order);
    std::sort(near_edge.begin(), near_edge.end(), order);
  }

  /// The decision table, replayed straight-line. Returns false when the
  /// question retired.
  bool decide(LiveQuestion& lq, std::int64_t now_ms) {
    const geomatch::Question& q = lq.q;
    if (now_ms - q.created_ms > q.max_age_ms) {
      log_.push_back(geomatch::ActionEvent{geomatch::ActionKind::Retire,
                                           q.question_id, "", now_ms});
      return false;
    }
    std::vector<Hit> inside, near_edge;
    scan(q, cfg_.edge_band_for(q), inside, near_edge);
    for (const Hit& h : inside) {
      if (pair_sent(q.question_id, h.loc.candidate_id)) continue;
      mark_pair(q.question_id, h.loc.candidate_id);
      log_.push_back(geomatch::ActionEvent{geomatch::ActionKind::Send,
                                           q.question_id,
                                           h.loc.candidate_id, now_ms});
      return true;
    }
    std::size_t granted = 0;
    for (const Hit& h : near_edge) {
      if (granted >= cfg_.max_update_requests) break;
      if (!consume_token(h.loc.candidate_id, now_ms)) continue;
      ++granted;
      log_.push_back(
          geomatch::ActionEvent{geomatch::ActionKind::RequestLocationUpdate,
                                q.question_id, h.loc.candidate_id, now_ms});
    }
    log_.push_back(geomatch::ActionEvent{geomatch::ActionKind::Dehydrate,
                                         q.question_id, "", now_ms});
    return true;
  }

  void park(const std::string& qid, std::uint32_t retries,
            std::int64_t now_ms) {
    wakes_.insert(Wake{now_ms + wake_interval(retries), qid});
  }

  /// Processes every wake due at or before target, in (time, id) order,
  /// then moves the cursor.
  void settle_until(std::int64_t target_ms) {
    while (!wakes_.empty()) {
      const Wake next = *wakes_.begin();
      if (next.at_ms > target_ms) break;
      wakes_.erase(wakes_.begin());
      auto it = live_.find(next.question_id);
      if (it == live_.end()) continue;  // answered; stale wake
      LiveQuestion& lq = it->second;
      lq.retries += 1;
      const auto& p = cfg_.dehydration;
      const bool too_old =
          next.at_ms - lq.q.created_ms > lq.q.max_age_ms ||
          (p.max_retries && lq.retries > *p.max_retries);
      if (too_old) {
        log_.push_back(geomatch::ActionEvent{geomatch::ActionKind::Retire,
                                             lq.q.question_id, "",
                                             next.at_ms});
        live_.erase(it);
        continue;
      }
      if (decide(lq, next.at_ms))
        park(lq.q.question_id, lq.retries, next.at_ms);
      else
        live_.erase(it);
    }
    if (target_ms > cursor_ms_) cursor_ms_ = target_ms;
  }

  void on_question(const geomatch::Question& q) {
    cursor_ms_ = q.created_ms;
    auto [it, inserted] = live_.emplace(q.question_id, LiveQuestion{q, 0});
    if (!inserted) return;  // parser rejects duplicates; belt and braces
    if (decide(it->second, q.created_ms))
      park(q.question_id, 0, q.created_ms);
    else
      live_.erase(it);
  }

  void on_candidate(const geomatch::CandidateLocation& c) {
    cursor_ms_ = c.reported_ms;
    auto it = locations_.find(c.candidate_id);
    if (it != locations_.end() && c.reported_ms < it->second.reported_ms)
      return;  // stale report
    locations_[c.candidate_id] = c;

    // Reverse match: live questions containing the point, closest fraction
    // of radius first.
    struct QHit {
      const geomatch::Question* q;
      double ratio;
    };
    std::vector<QHit> hits;
    for (const auto& [qid, lq] : live_) {
      const double d = geo::haversine_m(lq.q.lat_deg, lq.q.lon_deg,
                                        c.lat_deg, c.lon_deg);
      if (d <= lq.q.radius_m) hits.push_back(QHit{&lq.q, d / lq.q.radius_m});
    }
    std::sort(hits.begin(), hits.end(), [](const QHit& a, const QHit& b) {
      if (a.ratio != b.ratio) return a.ratio < b.ratio;
      return a.q->question_id < b.q->question_id;
    });
    for (const QHit& hit : hits) {
      if (c.reported_ms - hit.q->created_ms > hit.q->max_age_ms) continue;
      if (pair_sent(hit.q->question_id, c.candidate_id)) continue;
      mark_pair(hit.q->question_id, c.candidate_id);
      log_.push_back(geomatch::ActionEvent{geomatch::ActionKind::Send,
                                           hit.q->question_id,
                                           c.candidate_id, c.reported_ms});
    }
  }

  void on_answer(const AnswerEvent& a) {
    cursor_ms_ = a.t_ms;
    auto it = live_.find(a.question_id);
    if (it == live_.end()) return;
    live_.erase(it);
    // The parked wake becomes stale and is skipped when reached.
  }

  struct Wake {
    std::int64_t at_ms;
    std::string question_id;
    bool operator<(const Wake& other) const {
      if (at_ms != other.at_ms) return at_ms < other.at_ms;
      return question_id < other.question_id;
    }
  };

  geomatch::GeoMatchConfig cfg_;
  std::map<std::string, geomatch::CandidateLocation> locations_;
  std::map<std::string, LiveQuestion> live_;
  std::set<Wake> wakes_;
  std::set<std::string> sent_;
  std::map<std::string, Bucket> buckets_;
  std::vector<geomatch::ActionEvent> log_;
  std::int64_t cursor_ms_ = 0;
};

struct OracleDiff {
  bool pass = true;
  /// First line-level divergence, empty when pass.
  std::string divergence;
  std::size_t pipeline_lines = 0;
  std::size_t oracle_lines = 0;
};

/// Runs the pipeline replay and the flat model side by side and compares
/// their formatted logs line by line.
inline OracleDiff oracle_check(const Scenario& scenario,
                               const HarnessConfig& cfg) {
  const RunReport report = replay(scenario, cfg);
  OracleModel model(cfg);
  const std::vector<geomatch::ActionEvent> expected = model.run(scenario);

  OracleDiff diff;
  diff.pipeline_lines = report.log.size();
  diff.oracle_lines = expected.size();
  const std::size_t n = std::min(report.log.size(), expected.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (report.log[i] == expected[i]) continue;
    diff.pass = false;
    diff.divergence = "line " + std::to_string(i + 1) + ": pipeline '" +
                      geomatch::format_action(report.log[i]) + "' vs oracle '" +
                      geomatch::format_action(expected[i]) + "'";
    return diff;
  }
  if (report.log.size() != expected.size()) {
    diff.pass = false;
    const bool pipeline_longer = report.log.size() > expected.size();
    const auto& extra =
        pipeline_longer ? report.log[n] : expected[n];
    diff.divergence = "line " + std::to_string(n + 1) + ": " +
                      (pipeline_longer ? "pipeline" : "oracle") +
                      " has extra '" + geomatch::format_action(extra) + "'";
  }
  return diff;
}

}  // namespace fsd::harness
