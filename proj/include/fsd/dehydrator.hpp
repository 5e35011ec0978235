#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fsd/envelope.hpp"
#include "fsd/errors.hpp"

namespace fsd {

/// Wake scheduling knobs for dehydrated elements: a retirement horizon, and a
/// geometric backoff schedule (base interval grown by backoff_factor per
/// retry, capped at max_interval_ms) controlling how the retry resolution
/// shifts as an element ages. max_retries, when set, retires an element after
/// that many wakes regardless of age.
struct DehydrationPolicy {
  std::int64_t max_age_ms = 900'000;
  std::int64_t base_interval_ms = 1'000;
  double backoff_factor = 2.0;
  std::int64_t max_interval_ms = 60'000;
  std::optional<std::uint32_t> max_retries;

  void validate() const {
    if (base_interval_ms < 1)
      raise(Errc::BadPolicy, "base_interval_ms must be >= 1");
    if (max_interval_ms < base_interval_ms)
      raise(Errc::BadPolicy, "max_interval_ms must be >= base_interval_ms");
    if (!(backoff_factor >= 1.0))
      raise(Errc::BadPolicy, "backoff_factor must be >= 1.0");
    if (max_age_ms < 0) raise(Errc::BadPolicy, "max_age_ms must be >= 0");
  }
};

/// Wake interval for an element that has been retried retry_count times:
/// min(base * factor^retry_count, cap), floored to whole milliseconds.
/// Non-decreasing in retry_count.
inline std::int64_t next_interval(std::uint32_t retry_count,
                                  const DehydrationPolicy& policy) {
  const double raw = static_cast<double>(policy.base_interval_ms) *
                     std::pow(policy.backoff_factor,
                              static_cast<double>(retry_count));
  if (!(raw < static_cast<double>(policy.max_interval_ms)))
    return policy.max_interval_ms;  // also catches overflow to inf
  return static_cast<std::int64_t>(raw);
}

/// Whether an element, as it stands right now, is past its policy's
/// retirement point.
template <typename P>
bool retirement_due(const Envelope<P>& e, const DehydrationPolicy& policy,
                    std::int64_t now_ms) {
  if (now_ms - e.first_seen_ms > policy.max_age_ms) return true;
  if (policy.max_retries && e.retry_count > *policy.max_retries) return true;
  return false;
}

struct Ticket {
  std::uint64_t ticket_id = 0;
  ElementId element_id;
  std::int64_t wake_at_ms = 0;
  std::optional<DehydrationPolicy> policy_override;
};

/// Time-indexed store attached to a clock: elements are parked with an
/// absolute wake time and re-introduced by poll() once that time arrives.
/// At most one live ticket per element. Supports one concurrent poller and
/// any number of concurrent dehydrate/cancel callers.
template <typename P>
class TimeIndexedStore {
 public:
  explicit TimeIndexedStore(DehydrationPolicy default_policy = {})
      : default_policy_(default_policy) {
    default_policy_.validate();
  }

  const DehydrationPolicy& default_policy() const { return default_policy_; }

  struct DehydrateResult {
    std::optional<Ticket> ticket;        // set when the element was parked
    std::optional<Envelope<P>> retired;  // set when it was already too old
  };

  /// Parks an envelope until now + next_interval(retry_count). An element
  /// already past retirement is handed back on the retired side instead of
  /// being stored. An override replaces the whole policy for this element,
  /// both for the wake interval and for later retirement checks.
  DehydrateResult dehydrate(Envelope<P> e, std::int64_t now_ms,
                            std::optional<DehydrationPolicy> override =
                                std::nullopt) {
    if (override) override->validate();
    std::lock_guard lock(mu_);
    const DehydrationPolicy& policy = override ? *override : default_policy_;
    if (retirement_due(e, policy, now_ms))
      return DehydrateResult{std::nullopt, std::move(e)};
    if (by_element_.count(e.element_id))
      raise(Errc::DuplicateTicket,
            "element '" + e.element_id + "' already has a live ticket");
    Ticket ticket;
    ticket.ticket_id = next_ticket_id_++;
    ticket.element_id = e.element_id;
    ticket.wake_at_ms = now_ms + next_interval(e.retry_count, policy);
    ticket.policy_override = override;
    WakeKey key{ticket.wake_at_ms, ticket.element_id};
    by_element_.emplace(ticket.element_id, key);
    by_wake_.emplace(std::move(key), Record{ticket, std::move(e)});
    return DehydrateResult{ticket, std::nullopt};
  }

  struct PollResult {
    std::vector<Envelope<P>> rehydrated;  // due, retry_count bumped
    std::vector<Envelope<P>> retired;     // due but past retirement
  };

  /// Removes and returns every ticket with wake_at_ms <= now, ordered by
  /// (wake_at_ms, element_id). Rehydrated envelopes come back with
  /// retry_count incremented and origin Rehydrated; elements whose
  /// retirement point has passed by poll time are returned on the retired
  /// side instead.
  PollResult poll(std::int64_t now_ms) {
    std::lock_guard lock(mu_);
    PollResult result;
    auto it = by_wake_.begin();
    while (it != by_wake_.end() && it->first.wake_at_ms <= now_ms) {
      Record record = std::move(it->second);
      by_element_.erase(it->first.element_id);
      it = by_wake_.erase(it);
      Envelope<P> e = std::move(record.envelope);
      e.retry_count += 1;
      e.origin = Origin::Rehydrated;
      const DehydrationPolicy& policy = record.ticket.policy_override
                                            ? *record.ticket.policy_override
                                            : default_policy_;
      if (retirement_due(e, policy, now_ms))
        result.retired.push_back(std::move(e));
      else
        result.rehydrated.push_back(std::move(e));
    }
    return result;
  }

  struct Cancelled {
    Ticket ticket;
    Envelope<P> envelope;
  };

  /// Removes the element's live ticket, if any. A cancelled element is never
  /// rehydrated afterward; absence is a normal outcome.
  std::optional<Cancelled> cancel(const ElementId& element_id) {
    std::lock_guard lock(mu_);
    auto at = by_element_.find(element_id);
    if (at == by_element_.end()) return std::nullopt;
    auto rec = by_wake_.find(at->second);
    Cancelled out{rec->second.ticket, std::move(rec->second.envelope)};
    by_wake_.erase(rec);
    by_element_.erase(at);
    return out;
  }

  std::optional<std::int64_t> earliest_wake_ms() const {
    std::lock_guard lock(mu_);
    if (by_wake_.empty()) return std::nullopt;
    return by_wake_.begin()->first.wake_at_ms;
  }

  bool has_ticket(const ElementId& element_id) const {
    std::lock_guard lock(mu_);
    return by_element_.count(element_id) > 0;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return by_wake_.size();
  }

  /// Cross-checks the wake index against the per-element index; test probe.
  bool consistent() const {
    std::lock_guard lock(mu_);
    if (by_wake_.size() != by_element_.size()) return false;
    for (const auto& [id, key] : by_element_) {
      auto it = by_wake_.find(key);
      if (it == by_wake_.end()) return false;
      if (it->second.ticket.element_id != id) return false;
    }
    return true;
  }

 private:
  struct WakeKey {
    std::int64_t wake_at_ms;
    ElementId element_id;

    bool operator<(const WakeKey& other) const {
      if (wake_at_ms != other.wake_at_ms)
        return wake_at_ms < other.wake_at_ms;
      return element_id < other.element_id;
    }
  };

  struct Record {
    Ticket ticket;
    Envelope<P> envelope;
  };

  mutable std::mutex mu_;
  DehydrationPolicy default_policy_;
  std::map<WakeKey, Record> by_wake_;
  std::unordered_map<ElementId, WakeKey> by_element_;
  std::uint64_t next_ticket_id_ = 1;
};

}  // namespace fsd
