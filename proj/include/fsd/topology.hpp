#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fsd/dehydrator.hpp"
#include "fsd/envelope.hpp"
#include "fsd/errors.hpp"
#include "fsd/filter.hpp"
#include "fsd/splitter.hpp"

namespace fsd {

/// The three stage kinds of the model, plus terminal sinks as plumbing.
enum class StageKind { Filter, Splitter, Dehydrator, Sink };

inline const char* stage_kind_name(StageKind k) {
  switch (k) {
    case StageKind::Filter: return "filter";
    case StageKind::Splitter: return "splitter";
    case StageKind::Dehydrator: return "dehydrator";
    case StageKind::Sink: return "sink";
  }
  return "?";
}

/// Unit of hand-off between stages: the envelope plus the most recent soft
/// filter decision riding along as metadata. Hard passes leave an earlier
/// annotation in place; a later soft decision replaces it. Filters never
/// touch the payload itself.
template <typename P>
struct Message {
  Envelope<P> envelope;
  std::optional<FilterDecision<P>> decision;
};

/// Facilities a stage uses to dispose of the message it was handed. Every
/// message must end up emitted, forwarded, dropped, dead-lettered, retired,
/// stored, or delivered to a sink; the engine accounts for each.
template <typename P>
class StageContext {
 public:
  virtual ~StageContext() = default;
  virtual std::int64_t now_ms() const = 0;
  virtual const std::string& stage_name() const = 0;
  /// Send along the outgoing edge labeled with this route key.
  virtual void emit(const RouteKey& route, Message<P> msg) = 0;
  /// Send along the stage's single outgoing edge; terminal when none exists.
  virtual void forward(Message<P> msg) = 0;
  virtual void drop(Envelope<P> e) = 0;
  virtual void dead_letter(Envelope<P> e, std::string reason) = 0;
  virtual void retire(Envelope<P> e) = 0;
  /// Record that the message was absorbed into a dehydrator store.
  virtual void mark_stored() = 0;
  /// Record terminal delivery at a sink stage.
  virtual void arrive(Message<P> msg) = 0;
};

template <typename P>
class Stage {
 public:
  virtual ~Stage() = default;
  virtual StageKind kind() const = 0;
  virtual void on_message(Message<P> msg, StageContext<P>& ctx) = 0;
  /// Non-null only for dehydrator stages.
  virtual TimeIndexedStore<P>* store() { return nullptr; }
  /// Observer entry point for retirements detected at poll time.
  virtual void notify_retired(const Envelope<P>& e, std::int64_t now_ms) {
    (void)e;
    (void)now_ms;
  }
};

/// Filter stage: wraps a decision function. Pass forwards the message,
/// Drop ends it, Soft forwards with the decision attached. A throwing
/// decision function dead-letters the envelope instead of losing it.
template <typename P>
class FilterStage final : public Stage<P> {
 public:
  using DecisionFn = std::function<FilterDecision<P>(const Envelope<P>&)>;

  explicit FilterStage(DecisionFn fn) : fn_(std::move(fn)) {}

  StageKind kind() const override { return StageKind::Filter; }

  void on_message(Message<P> msg, StageContext<P>& ctx) override {
    FilterDecision<P> decision;
    try {
      decision = fn_(msg.envelope);
    } catch (const std::exception& ex) {
      ctx.dead_letter(std::move(msg.envelope),
                      std::string("PredicateFailure: ") + ex.what());
      return;
    }
    switch (decision.kind) {
      case DecisionKind::Drop:
        ctx.drop(std::move(msg.envelope));
        return;
      case DecisionKind::Pass:
        ctx.forward(std::move(msg));
        return;
      case DecisionKind::Soft:
        msg.decision = std::move(decision);
        ctx.forward(std::move(msg));
        return;
    }
  }

 private:
  DecisionFn fn_;
};

/// Splitter stage: wraps a routing function over the incoming message.
/// Exceptions and empty route sets dead-letter the envelope.
template <typename P>
class SplitterStage final : public Stage<P> {
 public:
  using RouteFn = std::function<RouteDecision<P>(const Message<P>&)>;

  explicit SplitterStage(RouteFn fn) : fn_(std::move(fn)) {}

  StageKind kind() const override { return StageKind::Splitter; }

  void on_message(Message<P> msg, StageContext<P>& ctx) override {
    RouteDecision<P> decision;
    try {
      decision = fn_(msg);
    } catch (const Error& err) {
      if (err.code() == Errc::NoRouteProduced) {
        ctx.dead_letter(std::move(msg.envelope), err.what());
        return;
      }
      ctx.dead_letter(std::move(msg.envelope),
                      std::string("LogicFailure: ") + err.what());
      return;
    } catch (const std::exception& ex) {
      ctx.dead_letter(std::move(msg.envelope),
                      std::string("LogicFailure: ") + ex.what());
      return;
    }
    if (decision.targets.empty()) {
      ctx.dead_letter(std::move(msg.envelope), "NoRouteProduced");
      return;
    }
    for (auto& target : decision.targets)
      ctx.emit(target.route, Message<P>{std::move(target.envelope), {}});
  }

 private:
  RouteFn fn_;
};

/// Dehydrator stage: parks arriving envelopes in its time-indexed store.
/// Elements already past retirement are retired on the spot. The engine
/// polls the store and re-introduces due elements along the stage's
/// feedback edge.
template <typename P>
class DehydratorStage final : public Stage<P> {
 public:
  /// Per-element policy override hook; return nullopt to use the default.
  using OverrideFn =
      std::function<std::optional<DehydrationPolicy>(const Envelope<P>&)>;
  using RetireHook = std::function<void(const Envelope<P>&, std::int64_t)>;
  using DehydrateHook = std::function<void(const Ticket&)>;

  explicit DehydratorStage(DehydrationPolicy policy = {},
                           OverrideFn override_fn = nullptr)
      : store_(policy), override_fn_(std::move(override_fn)) {}

  StageKind kind() const override { return StageKind::Dehydrator; }

  TimeIndexedStore<P>* store() override { return &store_; }

  void set_on_retired(RetireHook hook) { on_retired_ = std::move(hook); }
  void set_on_dehydrated(DehydrateHook hook) {
    on_dehydrated_ = std::move(hook);
  }

  void notify_retired(const Envelope<P>& e, std::int64_t now_ms) override {
    if (on_retired_) on_retired_(e, now_ms);
  }

  void on_message(Message<P> msg, StageContext<P>& ctx) override {
    if (store_.has_ticket(msg.envelope.element_id)) {
      ctx.dead_letter(std::move(msg.envelope),
                      "DuplicateTicket: element already dehydrated");
      return;
    }
    std::optional<DehydrationPolicy> override;
    if (override_fn_) {
      try {
        override = override_fn_(msg.envelope);
      } catch (const std::exception& ex) {
        ctx.dead_letter(std::move(msg.envelope),
                        std::string("LogicFailure: ") + ex.what());
        return;
      }
    }
    auto result =
        store_.dehydrate(std::move(msg.envelope), ctx.now_ms(), override);
    if (result.retired) {
      notify_retired(*result.retired, ctx.now_ms());
      ctx.retire(std::move(*result.retired));
      return;
    }
    if (on_dehydrated_) on_dehydrated_(*result.ticket);
    ctx.mark_stored();
  }

 private:
  TimeIndexedStore<P> store_;
  OverrideFn override_fn_;
  RetireHook on_retired_;
  DehydrateHook on_dehydrated_;
};

/// Terminal sink collecting envelopes; an optional callback observes each
/// arrival.
template <typename P>
class SinkStage final : public Stage<P> {
 public:
  using ArrivalFn = std::function<void(const Message<P>&)>;

  explicit SinkStage(ArrivalFn on_arrival = nullptr)
      : on_arrival_(std::move(on_arrival)) {}

  StageKind kind() const override { return StageKind::Sink; }

  void on_message(Message<P> msg, StageContext<P>& ctx) override {
    if (on_arrival_) on_arrival_(msg);
    ctx.arrive(std::move(msg));
  }

 private:
  ArrivalFn on_arrival_;
};

template <typename P>
class TopologyBuilder;

/// A validated, immutable stage graph. Edges are labeled with route keys;
/// feedback edges are the dehydrator re-entry paths and the only way a cycle
/// may close. Construct through TopologyBuilder.
template <typename P>
class Topology {
 public:
  struct Node {
    std::string name;
    std::shared_ptr<Stage<P>> stage;
    std::map<RouteKey, std::size_t> out;  // non-feedback edges
    std::optional<std::size_t> sole_out;  // set when exactly one out edge
    std::optional<std::size_t> feedback_target;  // dehydrators only
  };

  std::size_t stage_count() const { return nodes_.size(); }

  const Node& node(std::size_t idx) const { return nodes_[idx]; }

  const std::vector<std::size_t>& topo_order() const { return topo_order_; }

  std::optional<std::size_t> index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> entry() const { return entry_; }

  const std::string& entry_name() const {
    if (!entry_) raise(Errc::NoSuchStage, "topology has no entry stage");
    return nodes_[*entry_].name;
  }

  std::vector<std::string> stage_names() const {
    std::vector<std::string> names;
    names.reserve(nodes_.size());
    for (const auto& n : nodes_) names.push_back(n.name);
    return names;
  }

 private:
  friend class TopologyBuilder<P>;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> topo_order_;
  std::optional<std::size_t> entry_;
};

template <typename P>
class TopologyBuilder {
 public:
  TopologyBuilder& add_stage(std::string name,
                             std::shared_ptr<Stage<P>> stage) {
    if (names_.count(name))
      raise(Errc::DuplicateStageName, "stage '" + name + "' already defined");
    names_.insert(name);
    stages_.emplace_back(std::move(name), std::move(stage));
    return *this;
  }

  TopologyBuilder& add_filter(
      std::string name, typename FilterStage<P>::DecisionFn fn) {
    return add_stage(std::move(name),
                     std::make_shared<FilterStage<P>>(std::move(fn)));
  }

  /// Splitter over a pure function of the envelope.
  template <typename Fn>
  TopologyBuilder& add_stateless_splitter(std::string name, Fn logic) {
    auto wrapped = [logic = std::move(logic)](const Message<P>& msg) {
      return stateless_split(logic, msg.envelope);
    };
    return add_stage(std::move(name),
                     std::make_shared<SplitterStage<P>>(std::move(wrapped)));
  }

  TopologyBuilder& add_splitter(std::string name,
                                typename SplitterStage<P>::RouteFn fn) {
    return add_stage(std::move(name),
                     std::make_shared<SplitterStage<P>>(std::move(fn)));
  }

  TopologyBuilder& add_dehydrator(
      std::string name, DehydrationPolicy policy = {},
      typename DehydratorStage<P>::OverrideFn override_fn = nullptr) {
    return add_stage(std::move(name), std::make_shared<DehydratorStage<P>>(
                                          policy, std::move(override_fn)));
  }

  TopologyBuilder& add_sink(std::string name,
                            typename SinkStage<P>::ArrivalFn fn = nullptr) {
    return add_stage(std::move(name),
                     std::make_shared<SinkStage<P>>(std::move(fn)));
  }

  TopologyBuilder& add_edge(std::string from, std::string to,
                            RouteKey route) {
    edges_.push_back(EdgeSpec{std::move(from), std::move(to),
                              std::move(route), false});
    return *this;
  }

  TopologyBuilder& add_feedback_edge(std::string from, std::string to,
                                     RouteKey route) {
    edges_.push_back(EdgeSpec{std::move(from), std::move(to),
                              std::move(route), true});
    return *this;
  }

  TopologyBuilder& set_entry(std::string name) {
    entry_name_ = std::move(name);
    return *this;
  }

  /// Validates and assembles the topology. Rejects dangling edges, duplicate
  /// route keys per stage, feedback edges not sourced at a dehydrator, fanout
  /// the stage kind cannot express, and any cycle that does not pass through
  /// a dehydrator's feedback edge.
  Topology<P> build() {
    Topology<P> t;
    for (auto& [name, stage] : stages_) {
      t.index_.emplace(name, t.nodes_.size());
      t.nodes_.push_back(typename Topology<P>::Node{
          name, stage, {}, std::nullopt, std::nullopt});
    }

    for (const EdgeSpec& e : edges_) {
      auto from = t.index_.find(e.from);
      auto to = t.index_.find(e.to);
      if (from == t.index_.end() || to == t.index_.end())
        raise(Errc::DanglingEdge,
              "edge " + e.from + " -> " + e.to + " references unknown stage");
      auto& node = t.nodes_[from->second];
      StageKind kind = node.stage->kind();
      if (e.feedback) {
        if (kind != StageKind::Dehydrator)
          raise(Errc::InvalidFeedback,
                "feedback edge must originate at a dehydrator, not '" +
                    e.from + "'");
        if (node.feedback_target)
          raise(Errc::InvalidFeedback,
                "dehydrator '" + e.from + "' already has a feedback edge");
        node.feedback_target = to->second;
        continue;
      }
      if (kind == StageKind::Dehydrator)
        raise(Errc::InvalidFeedback,
              "dehydrator '" + e.from +
                  "' can only have feedback out-edges; retirement is "
                  "terminal");
      if (kind == StageKind::Sink)
        raise(Errc::InvalidStageFanout,
              "sink '" + e.from + "' cannot have outgoing edges");
      if (!node.out.emplace(e.route, to->second).second)
        raise(Errc::DuplicateRouteKey, "stage '" + e.from +
                                           "' has two edges labeled '" +
                                           e.route + "'");
    }

    for (auto& node : t.nodes_) {
      if (node.stage->kind() == StageKind::Filter && node.out.size() > 1)
        raise(Errc::InvalidStageFanout,
              "filter '" + node.name +
                  "' forwards on a single edge; found " +
                  std::to_string(node.out.size()));
      if (node.out.size() == 1) node.sole_out = node.out.begin()->second;
    }

    topo_sort(t);

    if (entry_name_) {
      auto it = t.index_.find(*entry_name_);
      if (it == t.index_.end())
        raise(Errc::NoSuchStage, "entry stage '" + *entry_name_ + "' unknown");
      t.entry_ = it->second;
    } else if (!t.nodes_.empty()) {
      t.entry_ = 0;
    }
    return t;
  }

 private:
  struct EdgeSpec {
    std::string from, to;
    RouteKey route;
    bool feedback;
  };

  // Kahn's algorithm over the non-feedback edges; any remainder is a cycle
  // that does not pass through a dehydrator feedback edge.
  static void topo_sort(Topology<P>& t) {
    const std::size_t n = t.nodes_.size();
    std::vector<std::size_t> indegree(n, 0);
    for (const auto& node : t.nodes_)
      for (const auto& [route, target] : node.out) ++indegree[target];

    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
      if (indegree[i] == 0) ready.push_back(i);

    t.topo_order_.clear();
    // Take lowest index first so ordering is reproducible.
    while (!ready.empty()) {
      auto lowest = std::min_element(ready.begin(), ready.end());
      std::size_t idx = *lowest;
      ready.erase(lowest);
      t.topo_order_.push_back(idx);
      for (const auto& [route, target] : t.nodes_[idx].out)
        if (--indegree[target] == 0) ready.push_back(target);
    }
    if (t.topo_order_.size() != n)
      raise(Errc::IllegalCycle,
            "topology contains a cycle that does not pass through a "
            "dehydrator");
  }

  std::vector<std::pair<std::string, std::shared_ptr<Stage<P>>>> stages_;
  std::set<std::string> names_;
  std::vector<EdgeSpec> edges_;
  std::optional<std::string> entry_name_;
};

}  // namespace fsd
