#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fsd/clock.hpp"
#include "fsd/envelope.hpp"
#include "fsd/errors.hpp"
#include "fsd/topology.hpp"

namespace fsd {

/// Element-instance accounting across a run. Everything that enters
/// (submitted plus derived) must end up in exactly one terminal bucket or be
/// parked in a dehydrator store; at quiescence the two sides balance.
struct ConservationReport {
  std::uint64_t submitted = 0;
  std::uint64_t derived = 0;
  std::uint64_t dropped = 0;
  std::uint64_t dead_lettered = 0;
  std::uint64_t retired = 0;
  std::uint64_t still_dehydrated = 0;
  /// Real sinks by name; terminal filter forwards appear as "<stage>.out"
  /// and out-of-band cancellations as "<stage>.cancelled".
  std::map<std::string, std::uint64_t> emitted_by_sink;

  std::uint64_t emitted() const {
    std::uint64_t total = 0;
    for (const auto& [name, count] : emitted_by_sink) total += count;
    return total;
  }

  std::uint64_t accounted() const {
    return emitted() + dropped + dead_lettered + retired + still_dehydrated;
  }

  bool conserved() const { return submitted + derived == accounted(); }
};

/// Per-call activity of run_until_idle / pump.
struct RunStats {
  std::map<std::string, std::uint64_t> processed;
  std::uint64_t rehydrated = 0;
  std::uint64_t retired = 0;

  std::uint64_t total_processed() const {
    std::uint64_t total = 0;
    for (const auto& [name, count] : processed) total += count;
    return total;
  }

  void merge(const RunStats& other) {
    for (const auto& [name, count] : other.processed)
      processed[name] += count;
    rehydrated += other.rehydrated;
    retired += other.retired;
  }
};

struct DeadLetterRecord {
  std::string stage;
  ElementId element_id;
  std::string reason;
};

/// Single-process execution engine over a Topology. Owns the inter-stage
/// queues, drives stages in topological order, polls dehydrator stores, and
/// keeps the conservation ledger.
///
/// Concurrency contract: submit() may be called from any thread; processing
/// (pump / run_until_idle) is single-pumper. In WallClock mode a nonzero
/// entry_capacity bounds the entry queue and submit() blocks on the bound.
template <typename P>
class Engine {
 public:
  Engine(Topology<P> topology, Clock& clock, std::size_t entry_capacity = 0)
      : topology_(std::move(topology)),
        clock_(clock),
        entry_capacity_(entry_capacity),
        queues_(topology_.stage_count()) {}

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const Topology<P>& topology() const { return topology_; }
  Clock& clock() { return clock_; }

  /// Introduces an external element at the entry stage. Normalizes envelope
  /// bookkeeping: origin External, zero retries, first_seen stamped now.
  void submit(Envelope<P> e) {
    auto entry = topology_.entry();
    if (!entry) raise(Errc::NoSuchStage, "topology has no entry stage");
    e.origin = Origin::External;
    e.retry_count = 0;
    e.first_seen_ms = clock_.now_ms();
    std::unique_lock<std::mutex> lock(mu_);
    if (draining_)
      raise(Errc::ShuttingDown, "submit after drain was requested");
    if (entry_capacity_ > 0 && clock_.mode() == ClockMode::WallClock) {
      entry_space_.wait(lock, [&] {
        return queues_[*entry].size() < entry_capacity_ || draining_;
      });
      if (draining_)
        raise(Errc::ShuttingDown, "submit after drain was requested");
    }
    ++submitted_;
    queues_[*entry].push_back(Message<P>{std::move(e), {}});
  }

  /// Stops accepting new submissions; queued work still completes.
  void drain() {
    std::lock_guard<std::mutex> lock(mu_);
    draining_ = true;
    entry_space_.notify_all();
  }

  bool draining() const {
    std::lock_guard<std::mutex> lock(mu_);
    return draining_;
  }

  /// One full pass: drains every queue in topological order, then polls the
  /// dehydrator stores at the current time. Returns the pass activity.
  /// Callable in either clock mode.
  RunStats pump() {
    RunStats stats;
    pump_into(stats);
    return stats;
  }

  /// Runs passes until a pass makes no progress. Requires the simulated
  /// clock: with wall time, "idle" is a race, not a state.
  RunStats run_until_idle() {
    if (clock_.mode() != ClockMode::Simulated)
      raise(Errc::SimulatedOnly,
            "run_until_idle requires the simulated clock");
    RunStats stats;
    while (pump_into(stats)) {
    }
    return stats;
  }

  /// Steps the simulated clock to each dehydrator wake time up to target,
  /// quiescing at every step, so timer-driven work fires at the exact
  /// millisecond it is due.
  RunStats advance_to(std::int64_t target_ms) {
    if (clock_.mode() != ClockMode::Simulated)
      raise(Errc::SimulatedOnly, "advance_to requires the simulated clock");
    RunStats stats;
    stats.merge(run_until_idle());
    while (true) {
      auto wake = earliest_wake_ms();
      if (!wake || *wake > target_ms) break;
      if (*wake > clock_.now_ms()) clock_.advance_to(*wake);
      stats.merge(run_until_idle());
    }
    if (target_ms > clock_.now_ms()) clock_.advance_to(target_ms);
    stats.merge(run_until_idle());
    return stats;
  }

  /// Earliest wake time across all dehydrator stores, if any element is
  /// parked.
  std::optional<std::int64_t> earliest_wake_ms() const {
    std::optional<std::int64_t> earliest;
    for (std::size_t i = 0; i < topology_.stage_count(); ++i) {
      auto* store = topology_.node(i).stage->store();
      if (!store) continue;
      auto wake = store->earliest_wake_ms();
      if (wake && (!earliest || *wake < *earliest)) earliest = wake;
    }
    return earliest;
  }

  /// Pulls an element out of the named dehydrator before its wake time,
  /// accounting it as resolved out of band (an emission at the pseudo-sink
  /// "<stage>.cancelled").
  std::optional<typename TimeIndexedStore<P>::Cancelled> cancel_dehydrated(
      const std::string& stage_name, const ElementId& id) {
    auto idx = topology_.index_of(stage_name);
    if (!idx) raise(Errc::NoSuchStage, "unknown stage '" + stage_name + "'");
    auto* store = topology_.node(*idx).stage->store();
    if (!store)
      raise(Errc::NoSuchStage,
            "stage '" + stage_name + "' is not a dehydrator");
    auto cancelled = store->cancel(id);
    if (cancelled) {
      std::lock_guard<std::mutex> lock(mu_);
      ++emitted_by_sink_[stage_name + ".cancelled"];
    }
    return cancelled;
  }

  std::size_t queued() const {
    std::lock_guard<std::mutex> lock(mu_);
    std::size_t total = 0;
    for (const auto& q : queues_) total += q.size();
    return total;
  }

  ConservationReport conservation() const {
    std::lock_guard<std::mutex> lock(mu_);
    ConservationReport report;
    report.submitted = submitted_;
    report.derived = derived_;
    report.dropped = dropped_;
    report.dead_lettered = dead_lettered_;
    report.retired = retired_;
    report.emitted_by_sink = emitted_by_sink_;
    for (std::size_t i = 0; i < topology_.stage_count(); ++i) {
      auto* store = topology_.node(i).stage->store();
      if (store) report.still_dehydrated += store->size();
    }
    return report;
  }

  std::map<std::string, std::uint64_t> processed_total() const {
    std::lock_guard<std::mutex> lock(mu_);
    return processed_total_;
  }

  std::vector<DeadLetterRecord> dead_letters() const {
    std::lock_guard<std::mutex> lock(mu_);
    return dead_letter_samples_;
  }

 private:
  static constexpr std::size_t kDeadLetterSampleCap = 32;

  class Ctx final : public StageContext<P> {
   public:
    Ctx(Engine& engine, std::size_t stage_idx, ElementId element_id)
        : engine_(engine),
          stage_idx_(stage_idx),
          element_id_(std::move(element_id)) {}

    std::int64_t now_ms() const override { return engine_.clock_.now_ms(); }

    const std::string& stage_name() const override {
      return engine_.topology_.node(stage_idx_).name;
    }

    void emit(const RouteKey& route, Message<P> msg) override {
      const auto& node = engine_.topology_.node(stage_idx_);
      auto it = node.out.find(route);
      if (it == node.out.end()) {
        dead_letter(std::move(msg.envelope),
                    "NoSuchRoute: '" + route + "' from '" + node.name + "'");
        return;
      }
      ++dispositions_;
      std::lock_guard<std::mutex> lock(engine_.mu_);
      engine_.queues_[it->second].push_back(std::move(msg));
    }

    void forward(Message<P> msg) override {
      const auto& node = engine_.topology_.node(stage_idx_);
      if (node.sole_out) {
        ++dispositions_;
        std::lock_guard<std::mutex> lock(engine_.mu_);
        engine_.queues_[*node.sole_out].push_back(std::move(msg));
        return;
      }
      if (node.out.empty()) {
        ++dispositions_;
        std::lock_guard<std::mutex> lock(engine_.mu_);
        ++engine_.emitted_by_sink_[node.name + ".out"];
        return;
      }
      dead_letter(std::move(msg.envelope),
                  "AmbiguousForward: '" + node.name + "' has several routes");
    }

    void drop(Envelope<P> e) override {
      (void)e;
      ++dispositions_;
      std::lock_guard<std::mutex> lock(engine_.mu_);
      ++engine_.dropped_;
    }

    void dead_letter(Envelope<P> e, std::string reason) override {
      ++dispositions_;
      std::lock_guard<std::mutex> lock(engine_.mu_);
      engine_.record_dead_letter(stage_name(), e.element_id,
                                 std::move(reason));
    }

    void retire(Envelope<P> e) override {
      (void)e;
      ++dispositions_;
      std::lock_guard<std::mutex> lock(engine_.mu_);
      ++engine_.retired_;
    }

    void mark_stored() override { ++dispositions_; }

    void arrive(Message<P> msg) override {
      (void)msg;
      ++dispositions_;
      std::lock_guard<std::mutex> lock(engine_.mu_);
      ++engine_.emitted_by_sink_[stage_name()];
    }

    std::size_t dispositions() const { return dispositions_; }
    const ElementId& element_id() const { return element_id_; }

   private:
    Engine& engine_;
    std::size_t stage_idx_;
    ElementId element_id_;
    std::size_t dispositions_ = 0;
  };

  // Requires mu_ held.
  void record_dead_letter(const std::string& stage, const ElementId& id,
                          std::string reason) {
    ++dead_lettered_;
    if (dead_letter_samples_.size() < kDeadLetterSampleCap)
      dead_letter_samples_.push_back(DeadLetterRecord{stage, id,
                                                      std::move(reason)});
  }

  void process(std::size_t stage_idx, Message<P> msg, RunStats& stats) {
    const auto& node = topology_.node(stage_idx);
    Ctx ctx(*this, stage_idx, msg.envelope.element_id);
    try {
      node.stage->on_message(std::move(msg), ctx);
    } catch (const std::exception& ex) {
      // The stage consumed the envelope before failing; keep the count
      // right even though the payload is gone.
      std::lock_guard<std::mutex> lock(mu_);
      record_dead_letter(node.name, ctx.element_id(),
                         std::string("StageFailure: ") + ex.what());
      ++processed_total_[node.name];
      ++stats.processed[node.name];
      return;
    }
    std::lock_guard<std::mutex> lock(mu_);
    if (ctx.dispositions() == 0)
      record_dead_letter(node.name, ctx.element_id(), "NoDisposition");
    else
      derived_ += ctx.dispositions() - 1;
    ++processed_total_[node.name];
    ++stats.processed[node.name];
  }

  bool pump_into(RunStats& stats) {
    bool progress = false;
    auto entry = topology_.entry();
    for (std::size_t idx : topology_.topo_order()) {
      std::deque<Message<P>> batch;
      {
        std::lock_guard<std::mutex> lock(mu_);
        batch.swap(queues_[idx]);
        if (entry && idx == *entry && !batch.empty())
          entry_space_.notify_all();
      }
      if (batch.empty()) continue;
      progress = true;
      for (auto& msg : batch) process(idx, std::move(msg), stats);
    }
    progress |= poll_dehydrators(stats);
    return progress;
  }

  bool poll_dehydrators(RunStats& stats) {
    bool any = false;
    const std::int64_t now = clock_.now_ms();
    for (std::size_t idx : topology_.topo_order()) {
      const auto& node = topology_.node(idx);
      auto* store = node.stage->store();
      if (!store) continue;
      auto result = store->poll(now);
      if (result.retired.empty() && result.rehydrated.empty()) continue;
      any = true;
      for (auto& env : result.retired) {
        node.stage->notify_retired(env, now);
        std::lock_guard<std::mutex> lock(mu_);
        ++retired_;
        ++stats.retired;
      }
      for (auto& env : result.rehydrated) {
        ++stats.rehydrated;
        if (node.feedback_target) {
          std::lock_guard<std::mutex> lock(mu_);
          queues_[*node.feedback_target].push_back(
              Message<P>{std::move(env), {}});
        } else {
          std::lock_guard<std::mutex> lock(mu_);
          record_dead_letter(node.name, env.element_id,
                             "NoFeedbackEdge: rehydrated with nowhere to go");
        }
      }
    }
    return any;
  }

  Topology<P> topology_;
  Clock& clock_;
  std::size_t entry_capacity_;

  mutable std::mutex mu_;
  std::condition_variable entry_space_;
  std::vector<std::deque<Message<P>>> queues_;
  bool draining_ = false;

  std::uint64_t submitted_ = 0;
  std::uint64_t derived_ = 0;
  std::uint64_t dropped_ = 0;
  std::uint64_t dead_lettered_ = 0;
  std::uint64_t retired_ = 0;
  std::map<std::string, std::uint64_t> emitted_by_sink_;
  std::map<std::string, std::uint64_t> processed_total_;
  std::vector<DeadLetterRecord> dead_letter_samples_;
};

}  // namespace fsd
