#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fsd/dehydrator.hpp"
#include "fsd/errors.hpp"
#include "fsd/geo.hpp"
#include "fsd/rtree.hpp"
#include "fsd/state_store.hpp"

namespace fsd::geomatch {

struct Question {
  std::string question_id;
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double radius_m = 0.0;
  std::int64_t created_ms = 0;
  std::int64_t max_age_ms = 0;
};

inline void validate_question(const Question& q) {
  if (q.question_id.empty())
    raise(Errc::InvalidArgument, "question_id must be non-empty");
  if (q.lat_deg < -90.0 || q.lat_deg > 90.0)
    raise(Errc::InvalidArgument,
          "question latitude out of range: " + q.question_id);
  if (q.lon_deg < -180.0 || q.lon_deg >= 180.0)
    raise(Errc::InvalidArgument,
          "question longitude out of range: " + q.question_id);
  if (!(q.radius_m > 0.0))
    raise(Errc::InvalidArgument,
          "question radius must be positive: " + q.question_id);
  if (q.max_age_ms < 0)
    raise(Errc::InvalidArgument,
          "question max_age must be non-negative: " + q.question_id);
}

struct CandidateLocation {
  std::string candidate_id;
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  std::int64_t reported_ms = 0;
};

inline void validate_candidate(const CandidateLocation& c) {
  if (c.candidate_id.empty())
    raise(Errc::InvalidArgument, "candidate_id must be non-empty");
  if (c.lat_deg < -90.0 || c.lat_deg > 90.0)
    raise(Errc::InvalidArgument,
          "candidate latitude out of range: " + c.candidate_id);
  if (c.lon_deg < -180.0 || c.lon_deg >= 180.0)
    raise(Errc::InvalidArgument,
          "candidate longitude out of range: " + c.candidate_id);
}

/// A candidate's reply to a question; resolves the question out of band.
struct Answer {
  std::string question_id;
  std::string candidate_id;
};

enum class ActionKind { Send, RequestLocationUpdate, Dehydrate, Retire };

inline const char* action_kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::Send: return "SEND";
    case ActionKind::RequestLocationUpdate: return "REQUEST_UPDATE";
    case ActionKind::Dehydrate: return "DEHYDRATE";
    case ActionKind::Retire: return "RETIRE";
  }
  return "?";
}

struct ActionEvent {
  ActionKind kind = ActionKind::Dehydrate;
  std::string question_id;
  std::string candidate_id;  // empty for Dehydrate/Retire
  std::int64_t at_ms = 0;

  friend bool operator==(const ActionEvent& a, const ActionEvent& b) {
    return a.kind == b.kind && a.question_id == b.question_id &&
           a.candidate_id == b.candidate_id && a.at_ms == b.at_ms;
  }
};

/// Total order used for the log: (at_ms, kind, question_id, candidate_id).
inline bool action_before(const ActionEvent& a, const ActionEvent& b) {
  return std::tie(a.at_ms, a.kind, a.question_id, a.candidate_id) <
         std::tie(b.at_ms, b.kind, b.question_id, b.candidate_id);
}

/// One log line: `KIND question_id candidate_id|- at_ms`.
inline std::string format_action(const ActionEvent& e) {
  std::string line = action_kind_name(e.kind);
  line += ' ';
  line += e.question_id;
  line += ' ';
  line += e.candidate_id.empty() ? "-" : e.candidate_id;
  line += ' ';
  line += std::to_string(e.at_ms);
  return line;
}

struct GeoMatchConfig {
  /// Edge band width as a fraction of each question's radius...
  double edge_band_frac = 0.1;
  /// ...unless an absolute width is configured.
  std::optional<double> edge_band_m;
  /// Cap on location-update requests per decision.
  std::size_t max_update_requests = 3;
  std::uint32_t limiter_capacity = 3;
  std::int64_t limiter_refill_ms = 60000;
  /// Padding multiplier for index rectangles. 1.0 is conservative; smaller
  /// values exist only to prove the oracle notices pruned matches.
  double rtree_inflation = 1.0;
  std::size_t rtree_node_capacity = 16;
  DehydrationPolicy dehydration{};

  double edge_band_for(const Question& q) const {
    return edge_band_m ? *edge_band_m : q.radius_m * edge_band_frac;
  }
};

struct UpsertResult {
  std::optional<CandidateLocation> previous;
  /// False when the report was older than the stored location.
  bool applied = false;
};

/// Latest-wins candidate location index backed by an R-tree pre-filter. The
/// hash map is authoritative; superseded R-tree entries are tombstoned by a
/// sequence check and purged by periodic rebuild.
class CandidateIndex {
 public:
  explicit CandidateIndex(std::size_t node_capacity = 16,
                          double inflation = 1.0)
      : node_capacity_(node_capacity), inflation_(inflation),
        tree_(node_capacity) {}

  std::size_t size() const { return live_.size(); }

  const CandidateLocation* find(const std::string& candidate_id) const {
    auto it = live_.find(candidate_id);
    return it == live_.end() ? nullptr : &it->second.loc;
  }

  UpsertResult upsert(const CandidateLocation& c) {
    validate_candidate(c);
    UpsertResult result;
    auto it = live_.find(c.candidate_id);
    if (it != live_.end()) {
      result.previous = it->second.loc;
      if (c.reported_ms < it->second.loc.reported_ms) return result;
      it->second.loc = c;
      it->second.seq = ++seq_counter_;
      ++stale_entries_;
    } else {
      live_.emplace(c.candidate_id, Stored{c, ++seq_counter_});
    }
    result.applied = true;
    tree_.insert(geo::point_rect(c.lat_deg, c.lon_deg),
                 TreeEntry{c.candidate_id, seq_counter_});
    maybe_rebuild();
    return result;
  }

  /// Visits the current location of every candidate whose point falls in
  /// the cap's bounding rectangles. Distance filtering is the caller's job.
  template <typename Fn>
  void query_cap(double lat_deg, double lon_deg, double radius_m,
                 Fn&& visit) const {
    const geo::CapBounds bounds =
        geo::cap_bounds(lat_deg, lon_deg, radius_m, inflation_);
    for (std::size_t i = 0; i < bounds.count; ++i) {
      tree_.query(bounds.rects[i],
                  [&](const geo::LatLonRect&, const TreeEntry& entry) {
                    auto it = live_.find(entry.candidate_id);
                    if (it == live_.end() || it->second.seq != entry.seq)
                      return;  // superseded location
                    visit(it->second.loc);
                  });
    }
  }

  template <typename Fn>
  void for_each(Fn&& visit) const {
    for (const auto& [id, stored] : live_) visit(stored.loc);
  }

 private:
  struct Stored {
    CandidateLocation loc;
    std::uint64_t seq;
  };
  struct TreeEntry {
    std::string candidate_id;
    std::uint64_t seq;
  };

  void maybe_rebuild() {
    if (stale_entries_ < 64 || stale_entries_ < live_.size()) return;
    tree_.clear();
    for (const auto& [id, stored] : live_)
      tree_.insert(geo::point_rect(stored.loc.lat_deg, stored.loc.lon_deg),
                   TreeEntry{id, stored.seq});
    stale_entries_ = 0;
  }

  std::size_t node_capacity_;
  double inflation_;
  geo::RTree<TreeEntry> tree_;
  std::unordered_map<std::string, Stored> live_;
  std::uint64_t seq_counter_ = 0;
  std::size_t stale_entries_ = 0;
};

/// Live-question index for the candidate-arrival direction. Questions are
/// indexed by the bounding rectangles of their radius cap; answered or
/// retired questions are removed.
class QuestionIndex {
 public:
  explicit QuestionIndex(std::size_t node_capacity = 16,
                         double inflation = 1.0)
      : inflation_(inflation), tree_(node_capacity) {}

  std::size_t size() const { return live_.size(); }

  bool contains(const std::string& question_id) const {
    return live_.count(question_id) != 0;
  }

  const Question* find(const std::string& question_id) const {
    auto it = live_.find(question_id);
    return it == live_.end() ? nullptr : &it->second.q;
  }

  /// Inserts or refreshes; refreshing an identical live question is a no-op.
  void add(const Question& q) {
    validate_question(q);
    auto it = live_.find(q.question_id);
    if (it != live_.end()) return;
    live_.emplace(q.question_id, Stored{q, ++seq_counter_});
    insert_rects(q, seq_counter_);
  }

  bool remove(const std::string& question_id) {
    auto it = live_.find(question_id);
    if (it == live_.end()) return false;
    stale_entries_ += 2;  // a question may occupy two rects
    live_.erase(it);
    maybe_rebuild();
    return true;
  }

  /// Visits every live question whose radius cap rectangles contain the
  /// point. Exact containment is the caller's job.
  template <typename Fn>
  void query_point(double lat_deg, double lon_deg, Fn&& visit) const {
    const geo::LatLonRect window = geo::point_rect(lat_deg, lon_deg);
    std::vector<std::uint64_t> seen;  // antimeridian splits store two rects
    tree_.query(window,
                [&](const geo::LatLonRect&, const TreeEntry& entry) {
                  auto it = live_.find(entry.question_id);
                  if (it == live_.end() || it->second.seq != entry.seq)
                    return;
                  if (std::find(seen.begin(), seen.end(), entry.seq) !=
                      seen.end())
                    return;
                  seen.push_back(entry.seq);
                  visit(it->second.q);
                });
  }

  template <typename Fn>
  void for_each(Fn&& visit) const {
    for (const auto& [id, stored] : live_) visit(stored.q);
  }

 private:
  struct Stored {
    Question q;
    std::uint64_t seq;
  };
  struct TreeEntry {
    std::string question_id;
    std::uint64_t seq;
  };

  void insert_rects(const Question& q, std::uint64_t seq) {
    const geo::CapBounds bounds =
        geo::cap_bounds(q.lat_deg, q.lon_deg, q.radius_m, inflation_);
    for (std::size_t i = 0; i < bounds.count; ++i)
      tree_.insert(bounds.rects[i], TreeEntry{q.question_id, seq});
  }

  void maybe_rebuild() {
    if (stale_entries_ < 64 || stale_entries_ < live_.size()) return;
    tree_.clear();
    for (const auto& [id, stored] : live_) insert_rects(stored.q, stored.seq);
    stale_entries_ = 0;
  }

  double inflation_;
  geo::RTree<TreeEntry> tree_;
  std::unordered_map<std::string, Stored> live_;
  std::uint64_t seq_counter_ = 0;
  std::size_t stale_entries_ = 0;
};

struct ScoredCandidate {
  CandidateLocation loc;
  double distance_m = 0.0;
};

struct MatchResult {
  std::vector<ScoredCandidate> inside;     // d <= radius
  std::vector<ScoredCandidate> near_edge;  // radius < d <= radius + band
};

/// Exact match of a question against the index: candidates within the
/// radius, and candidates in the edge band just outside it. Both lists
/// sorted by distance, ties by candidate_id.
inline MatchResult match_question(const CandidateIndex& index,
                                  const Question& q, double edge_band_m) {
  if (edge_band_m < 0.0)
    raise(Errc::InvalidArgument, "edge_band_m must be non-negative");
  MatchResult result;
  index.query_cap(
      q.lat_deg, q.lon_deg, q.radius_m + edge_band_m,
      [&](const CandidateLocation& c) {
        const double d =
            geo::haversine_m(q.lat_deg, q.lon_deg, c.lat_deg, c.lon_deg);
        if (d <= q.radius_m)
          result.inside.push_back(ScoredCandidate{c, d});
        else if (d <= q.radius_m + edge_band_m)
          result.near_edge.push_back(ScoredCandidate{c, d});
      });
  auto by_distance = [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.distance_m != b.distance_m) return a.distance_m < b.distance_m;
    return a.loc.candidate_id < b.loc.candidate_id;
  };
  std::sort(result.inside.begin(), result.inside.end(), by_distance);
  std::sort(result.near_edge.begin(), result.near_edge.end(), by_distance);
  return result;
}

struct QuestionMatch {
  Question q;
  double distance_m = 0.0;
  double ratio = 0.0;  // distance / radius, in [0, 1] for a hit
};

/// Exact reverse match: every live question whose radius contains the
/// candidate, sorted by closeness relative to each radius, ties by
/// question_id.
inline std::vector<QuestionMatch> match_candidate(const QuestionIndex& index,
                                                  const CandidateLocation& c) {
  std::vector<QuestionMatch> hits;
  index.query_point(c.lat_deg, c.lon_deg, [&](const Question& q) {
    const double d =
        geo::haversine_m(q.lat_deg, q.lon_deg, c.lat_deg, c.lon_deg);
    if (d <= q.radius_m)
      hits.push_back(QuestionMatch{q, d, d / q.radius_m});
  });
  std::sort(hits.begin(), hits.end(),
            [](const QuestionMatch& a, const QuestionMatch& b) {
              if (a.ratio != b.ratio) return a.ratio < b.ratio;
              return a.q.question_id < b.q.question_id;
            });
  return hits;
}

/// Pair-level send ledger over the shared state store: a (question,
/// candidate) pair is marked at the first send and never sent again.
class DedupStore {
 public:
  bool already_sent(const std::string& question_id,
                    const std::string& candidate_id) const {
    return store_.contains(key(question_id, candidate_id));
  }

  void mark_sent(const std::string& question_id,
                 const std::string& candidate_id) {
    store_.put(key(question_id, candidate_id), 1);
  }

  std::size_t size() const { return store_.size(); }

 private:
  static std::string key(const std::string& question_id,
                         const std::string& candidate_id) {
    std::string k = question_id;
    k += '\x1f';
    k += candidate_id;
    return k;
  }

  StateStore<int> store_{"dedup"};
};

/// Per-candidate token bucket with fixed refill windows: the window opens at
/// the candidate's first request and every refill_interval_ms thereafter the
/// bucket resets to capacity. Within a window at most `capacity` requests
/// are granted.
class RateLimiter {
 public:
  struct Bucket {
    std::uint32_t tokens = 0;
    std::int64_t window_start_ms = 0;
  };

  RateLimiter(std::uint32_t capacity, std::int64_t refill_interval_ms)
      : capacity_(capacity), refill_interval_ms_(refill_interval_ms) {
    if (refill_interval_ms <= 0)
      raise(Errc::InvalidArgument, "refill interval must be positive");
  }

  std::uint32_t capacity() const { return capacity_; }
  std::int64_t refill_interval_ms() const { return refill_interval_ms_; }

  /// Consumes one token for the candidate if available.
  bool try_consume(const std::string& candidate_id, std::int64_t now_ms) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      auto versioned = store_.get_versioned(candidate_id);
      Bucket b;
      StoreVersion expected = 0;
      if (versioned) {
        b = versioned->first;
        expected = versioned->second;
        roll_window(b, now_ms);
      } else {
        b = Bucket{capacity_, now_ms};
      }
      if (b.tokens == 0) {
        // Persist the rolled window so state reflects time passing.
        if (!versioned ||
            store_.compare_and_put(candidate_id, expected, b))
          return false;
        continue;
      }
      --b.tokens;
      if (store_.compare_and_put(candidate_id, expected, b)) return true;
    }
    raise(Errc::InvalidArgument, "rate limiter contention did not settle");
  }

  /// Tokens the candidate would have at now_ms, without consuming.
  std::uint32_t tokens_available(const std::string& candidate_id,
                                 std::int64_t now_ms) const {
    auto bucket = store_.get(candidate_id);
    if (!bucket) return capacity_;
    Bucket b = *bucket;
    roll_window(b, now_ms);
    return b.tokens;
  }

 private:
  void roll_window(Bucket& b, std::int64_t now_ms) const {
    if (now_ms < b.window_start_ms + refill_interval_ms_) return;
    const std::int64_t elapsed = now_ms - b.window_start_ms;
    b.window_start_ms += (elapsed / refill_interval_ms_) * refill_interval_ms_;
    b.tokens = capacity_;
  }

  std::uint32_t capacity_;
  std::int64_t refill_interval_ms_;
  StateStore<Bucket> store_{"limiter"};
};

enum class Outcome { Sent, Dehydrated, Retired };

struct BusinessDecision {
  std::vector<ActionEvent> events;
  Outcome outcome = Outcome::Dehydrated;
  /// Candidate chosen when outcome is Sent.
  std::string sent_to;
};

/// The per-question decision table. In order: a question past its lifetime
/// retires; otherwise the nearest not-yet-sent inside candidate gets the
/// question; otherwise near-edge candidates are asked (token and cap
/// permitting) to refresh their location and the question parks; otherwise
/// it just parks. Exhausted dedup (every inside candidate already tried)
/// falls through to the near-edge branch.
inline BusinessDecision business_decide(const MatchResult& matches,
                                        DedupStore& dedup,
                                        RateLimiter& limiter,
                                        const Question& q,
                                        std::int64_t now_ms,
                                        const GeoMatchConfig& cfg) {
  BusinessDecision decision;
  if (now_ms - q.created_ms > q.max_age_ms) {
    decision.outcome = Outcome::Retired;
    decision.events.push_back(
        ActionEvent{ActionKind::Retire, q.question_id, "", now_ms});
    return decision;
  }
  for (const ScoredCandidate& sc : matches.inside) {
    if (dedup.already_sent(q.question_id, sc.loc.candidate_id)) continue;
    dedup.mark_sent(q.question_id, sc.loc.candidate_id);
    decision.outcome = Outcome::Sent;
    decision.sent_to = sc.loc.candidate_id;
    decision.events.push_back(ActionEvent{ActionKind::Send, q.question_id,
                                          sc.loc.candidate_id, now_ms});
    return decision;
  }
  std::size_t granted = 0;
  for (const ScoredCandidate& sc : matches.near_edge) {
    if (granted >= cfg.max_update_requests) break;
    if (!limiter.try_consume(sc.loc.candidate_id, now_ms)) continue;
    ++granted;
    decision.events.push_back(ActionEvent{ActionKind::RequestLocationUpdate,
                                          q.question_id, sc.loc.candidate_id,
                                          now_ms});
  }
  decision.outcome = Outcome::Dehydrated;
  decision.events.push_back(
      ActionEvent{ActionKind::Dehydrate, q.question_id, "", now_ms});
  return decision;
}

}  // namespace fsd::geomatch
