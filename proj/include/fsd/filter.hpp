#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fsd/envelope.hpp"
#include "fsd/errors.hpp"

namespace fsd {

enum class DecisionKind { Pass, Drop, Soft };

/// An envelope paired with the score a filter assigned to it. Candidate sets
/// are kept in descending score order, ties broken by ascending element_id.
template <typename P>
struct ScoredElement {
  double score = 0.0;
  Envelope<P> element;
};

template <typename P>
inline bool scored_before(const ScoredElement<P>& a,
                          const ScoredElement<P>& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.element.element_id < b.element.element_id;
}

/// Outcome of a filter: a hard pass/drop, or a soft decision carrying a
/// score with a margin of error, a candidate set, or both. The margin is
/// carried for downstream consumers; the framework does not interpret it.
template <typename P>
struct FilterDecision {
  DecisionKind kind = DecisionKind::Pass;
  std::optional<double> score;                  // Soft only
  double margin_of_error = 0.0;                 // Soft only, >= 0
  std::vector<ScoredElement<P>> candidate_set;  // Soft only

  static FilterDecision pass() { return FilterDecision{}; }

  static FilterDecision drop() {
    FilterDecision d;
    d.kind = DecisionKind::Drop;
    return d;
  }

  static FilterDecision soft(double score, double margin_of_error = 0.0) {
    if (margin_of_error < 0.0)
      raise(Errc::InvalidArgument, "margin_of_error must be non-negative");
    FilterDecision d;
    d.kind = DecisionKind::Soft;
    d.score = score;
    d.margin_of_error = margin_of_error;
    return d;
  }

  static FilterDecision soft_set(std::vector<ScoredElement<P>> set) {
    FilterDecision d;
    d.kind = DecisionKind::Soft;
    d.candidate_set = std::move(set);
    return d;
  }

  bool is_pass() const { return kind == DecisionKind::Pass; }
  bool is_drop() const { return kind == DecisionKind::Drop; }
  bool is_soft() const { return kind == DecisionKind::Soft; }
};

/// Applies a pure predicate to a single envelope. The decision depends on
/// nothing but the envelope itself; predicate exceptions propagate so the
/// hosting stage can dead-letter the envelope.
template <typename P, typename Pred>
FilterDecision<P> stateless_filter(Pred&& predicate, const Envelope<P>& e) {
  return predicate(e) ? FilterDecision<P>::pass() : FilterDecision<P>::drop();
}

template <typename P>
struct AggregationFilterConfig {
  std::size_t x = 1;  // the top-X bound, >= 1
  std::function<double(const Envelope<P>&)> score_fn;
  std::size_t tier_index = 0;
};

/// Stateful top-X aggregation filter. State is bounded: at most X retained
/// entries plus a count of elements seen. Each step folds one envelope into
/// the state and reports the current top-X as a soft decision.
///
/// Re-observing an element_id replaces its retained entry if present;
/// an element evicted earlier competes again as a fresh candidate.
template <typename P>
class TopXAggregator {
 public:
  explicit TopXAggregator(AggregationFilterConfig<P> cfg)
      : cfg_(std::move(cfg)) {
    if (cfg_.x < 1) raise(Errc::InvalidArgument, "top-X bound must be >= 1");
    if (!cfg_.score_fn)
      raise(Errc::InvalidArgument, "aggregation filter needs a score_fn");
  }

  const AggregationFilterConfig<P>& config() const { return cfg_; }

  /// Folds e into the state and returns a Soft decision whose candidate_set
  /// is the current top-X. score_fn exceptions propagate to the caller.
  FilterDecision<P> step(const Envelope<P>& e) {
    const double score = cfg_.score_fn(e);
    ++seen_;
    auto member = members_.find(e.element_id);
    if (member != members_.end()) {
      ordered_.erase(member->second);
      members_.erase(member);
    }
    auto [it, inserted] =
        ordered_.emplace(Key{score, e.element_id}, e);
    (void)inserted;
    members_.emplace(e.element_id, it->first);
    if (ordered_.size() > cfg_.x) {
      auto worst = std::prev(ordered_.end());
      members_.erase(worst->first.id);
      ordered_.erase(worst);
    }
    return FilterDecision<P>::soft_set(candidate_set());
  }

  std::vector<ScoredElement<P>> candidate_set() const {
    std::vector<ScoredElement<P>> out;
    out.reserve(ordered_.size());
    for (const auto& [key, env] : ordered_)
      out.push_back(ScoredElement<P>{key.score, env});
    return out;
  }

  /// Evicts every retained entry whose element_id is not in keep. Used by
  /// tier composition: an element is eligible downstream only while it
  /// survives upstream.
  void retain_only(const std::vector<ElementId>& keep) {
    for (auto it = members_.begin(); it != members_.end();) {
      const bool kept =
          std::find(keep.begin(), keep.end(), it->first) != keep.end();
      if (kept) {
        ++it;
        continue;
      }
      ordered_.erase(it->second);
      it = members_.erase(it);
    }
  }

  std::uint64_t seen_count() const { return seen_; }

 private:
  struct Key {
    double score;
    ElementId id;
  };
  struct KeyLess {
    bool operator()(const Key& a, const Key& b) const {
      if (a.score != b.score) return a.score > b.score;
      return a.id < b.id;
    }
  };

  AggregationFilterConfig<P> cfg_;
  std::map<Key, Envelope<P>, KeyLess> ordered_;      // at most x entries
  std::unordered_map<ElementId, Key> members_;       // ids currently retained
  std::uint64_t seen_ = 0;
};

/// Tiers of aggregation filters. Each tier aggregates privately and hands its
/// current candidate set to the next; only the final tier's soft decision
/// leaves the composite. Membership cascades: an element stays eligible at
/// tier i+1 only while it survives tier i's current set, so the final set is
/// bounded by the narrowest tier. Each tier re-ranks the surviving elements
/// with its own score_fn.
template <typename P>
class TieredTopX {
 public:
  explicit TieredTopX(std::vector<AggregationFilterConfig<P>> tiers) {
    if (tiers.empty()) raise(Errc::EmptyTierList, "at least one tier required");
    tiers_.reserve(tiers.size());
    for (auto& cfg : tiers) tiers_.emplace_back(std::move(cfg));
  }

  std::size_t tier_count() const { return tiers_.size(); }

  FilterDecision<P> step(const Envelope<P>& e) {
    tiers_.front().step(e);
    for (std::size_t i = 1; i < tiers_.size(); ++i) {
      const auto upstream = tiers_[i - 1].candidate_set();
      std::vector<ElementId> alive;
      alive.reserve(upstream.size());
      for (const ScoredElement<P>& candidate : upstream)
        alive.push_back(candidate.element.element_id);
      // Prune before folding: a stale survivor left in place could evict a
      // live upstream element during the fold and understate the set.
      tiers_[i].retain_only(alive);
      for (const ScoredElement<P>& candidate : upstream)
        tiers_[i].step(candidate.element);
    }
    return current();
  }

  FilterDecision<P> current() const {
    return FilterDecision<P>::soft_set(tiers_.back().candidate_set());
  }

 private:
  std::vector<TopXAggregator<P>> tiers_;
};

}  // namespace fsd
