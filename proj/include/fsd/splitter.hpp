#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fsd/envelope.hpp"
#include "fsd/errors.hpp"
#include "fsd/state_store.hpp"

namespace fsd {

using RouteKey = std::string;

/// A splitter's verdict: one or more (route, envelope) targets. A splitter
/// must route; producing no target is an error, not a silent drop, since
/// dropping is the filter's job.
template <typename P>
struct RouteDecision {
  struct Target {
    RouteKey route;
    Envelope<P> envelope;
  };

  std::vector<Target> targets;

  static RouteDecision to(RouteKey route, Envelope<P> envelope) {
    RouteDecision d;
    d.targets.push_back(Target{std::move(route), std::move(envelope)});
    return d;
  }

  RouteDecision&& and_to(RouteKey route, Envelope<P> envelope) && {
    targets.push_back(Target{std::move(route), std::move(envelope)});
    return std::move(*this);
  }

  RouteDecision& and_to(RouteKey route, Envelope<P> envelope) & {
    targets.push_back(Target{std::move(route), std::move(envelope)});
    return *this;
  }
};

/// Builds a child envelope from a parent: fresh identity with a lineage link,
/// the parent's event time, and admission stamped at now. Derived envelopes
/// enter the pipeline as external, unretried elements.
template <typename P>
Envelope<P> derive(const Envelope<P>& parent, ElementId child_id, P payload,
                   std::int64_t now_ms) {
  Envelope<P> child;
  child.element_id = std::move(child_id);
  child.payload = std::move(payload);
  child.event_time_ms = parent.event_time_ms;
  child.first_seen_ms = now_ms;
  child.retry_count = 0;
  child.origin = Origin::External;
  child.parent_id = parent.element_id;
  return child;
}

/// Routes an envelope by a pure function of the envelope alone. Raises
/// NoRouteProduced when the logic yields no target; logic exceptions
/// propagate so the hosting stage can dead-letter the envelope.
template <typename P, typename Fn>
RouteDecision<P> stateless_split(Fn&& logic, const Envelope<P>& e) {
  RouteDecision<P> decision = logic(e);
  if (decision.targets.empty())
    raise(Errc::NoRouteProduced, "splitter produced no route for element '" +
                                     e.element_id + "'");
  return decision;
}

/// Routes an envelope with access to shared state. The logic runs against a
/// buffered transaction: its writes are committed atomically before the
/// decision is released downstream, and are discarded wholesale if the logic
/// throws. Version conflicts rerun the logic on a fresh view.
template <typename P, typename V, typename Fn>
RouteDecision<P> memory_split(StateStore<V>& store, Fn&& logic,
                              const Envelope<P>& e) {
  // A conflict means another writer committed between our reads and our
  // commit; rerunning against the new state preserves read-modify-write
  // atomicity per key. The attempt bound only guards against a logic that
  // never stops conflicting with itself.
  for (int attempt = 0; attempt < 10'000; ++attempt) {
    StoreTxn<V> txn(store);
    RouteDecision<P> decision = logic(txn, e);
    if (decision.targets.empty())
      raise(Errc::NoRouteProduced, "splitter produced no route for element '" +
                                       e.element_id + "'");
    if (txn.commit()) return decision;
  }
  raise(Errc::InvalidArgument,
        "memory_split could not commit after 10000 attempts");
}

}  // namespace fsd
