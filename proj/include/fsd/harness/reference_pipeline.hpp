#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fsd/clock.hpp"
#include "fsd/engine.hpp"
#include "fsd/envelope.hpp"
#include "fsd/geomatch.hpp"
#include "fsd/topology.hpp"

namespace fsd::harness {

using GeoPayload = std::variant<geomatch::Question, geomatch::CandidateLocation,
                                geomatch::Answer>;
using GeoEnvelope = Envelope<GeoPayload>;
using GeoMessage = Message<GeoPayload>;

/// State shared by the pipeline stages: the two spatial indexes, the pair
/// ledger, the limiter, and the action log. Single-writer per the replay
/// and bench contracts.
struct PipelineState {
  explicit PipelineState(const geomatch::GeoMatchConfig& config)
      : cfg(config),
        candidates(config.rtree_node_capacity, config.rtree_inflation),
        questions(config.rtree_node_capacity, config.rtree_inflation),
        limiter(config.limiter_capacity, config.limiter_refill_ms) {}

  geomatch::GeoMatchConfig cfg;
  geomatch::CandidateIndex candidates;
  geomatch::QuestionIndex questions;
  geomatch::DedupStore dedup;
  geomatch::RateLimiter limiter;
  std::vector<geomatch::ActionEvent> log;
  /// Decision latencies relative to question creation, one per logged event.
  std::vector<std::int64_t> latencies_ms;
  /// match_question + business_decide invocations (the benched operation).
  std::uint64_t decisions = 0;

  void record(geomatch::ActionEvent e, std::int64_t created_ms) {
    latencies_ms.push_back(e.at_ms - created_ms);
    log.push_back(std::move(e));
  }
};

/// Routes incoming payloads by type.
class IngestStage final : public Stage<GeoPayload> {
 public:
  StageKind kind() const override { return StageKind::Splitter; }

  void on_message(GeoMessage msg, StageContext<GeoPayload>& ctx) override {
    const char* route = "question";
    if (std::holds_alternative<geomatch::CandidateLocation>(
            msg.envelope.payload))
      route = "candidate";
    else if (std::holds_alternative<geomatch::Answer>(msg.envelope.payload))
      route = "answer";
    ctx.emit(route, std::move(msg));
  }
};

/// The cached filter over candidate locations: matches the question against
/// the index and forwards it with a soft decision whose candidate set holds
/// every candidate within radius + edge band, scored by negated distance
/// (so higher score means closer).
class MatcherStage final : public Stage<GeoPayload> {
 public:
  explicit MatcherStage(std::shared_ptr<PipelineState> state)
      : state_(std::move(state)) {}

  StageKind kind() const override { return StageKind::Filter; }

  void on_message(GeoMessage msg, StageContext<GeoPayload>& ctx) override {
    const auto* q = std::get_if<geomatch::Question>(&msg.envelope.payload);
    if (!q) {
      ctx.dead_letter(std::move(msg.envelope),
                      "TypeMismatch: matcher expects questions");
      return;
    }
    state_->questions.add(*q);
    const geomatch::MatchResult matches = geomatch::match_question(
        state_->candidates, *q, state_->cfg.edge_band_for(*q));

    std::vector<ScoredElement<GeoPayload>> scored;
    scored.reserve(matches.inside.size() + matches.near_edge.size());
    auto add = [&](const geomatch::ScoredCandidate& sc) {
      GeoEnvelope env;
      env.element_id = sc.loc.candidate_id;
      env.payload = sc.loc;
      env.event_time_ms = sc.loc.reported_ms;
      env.first_seen_ms = msg.envelope.first_seen_ms;
      scored.push_back(ScoredElement<GeoPayload>{-sc.distance_m, env});
    };
    for (const auto& sc : matches.inside) add(sc);
    for (const auto& sc : matches.near_edge) add(sc);
    std::sort(scored.begin(), scored.end(), scored_before<GeoPayload>);
    msg.decision = FilterDecision<GeoPayload>::soft_set(std::move(scored));
    ctx.forward(std::move(msg));
  }

 private:
  std::shared_ptr<PipelineState> state_;
};

/// The business-logic splitter: reconstructs the match lists from the soft
/// decision, decides, logs every event except Retire (the dehydrator logs
/// retirements so poll-time and arrival-time ones look the same), and parks
/// the question.
class LogicStage final : public Stage<GeoPayload> {
 public:
  explicit LogicStage(std::shared_ptr<PipelineState> state)
      : state_(std::move(state)) {}

  StageKind kind() const override { return StageKind::Splitter; }

  void on_message(GeoMessage msg, StageContext<GeoPayload>& ctx) override {
    const auto* q = std::get_if<geomatch::Question>(&msg.envelope.payload);
    if (!q) {
      ctx.dead_letter(std::move(msg.envelope),
                      "TypeMismatch: logic expects questions");
      return;
    }
    geomatch::MatchResult matches;
    if (msg.decision) {
      const double band = state_->cfg.edge_band_for(*q);
      for (const auto& scored : msg.decision->candidate_set) {
        const auto* loc = std::get_if<geomatch::CandidateLocation>(
            &scored.element.payload);
        if (!loc) continue;
        const double d = -scored.score;
        if (d <= q->radius_m)
          matches.inside.push_back(geomatch::ScoredCandidate{*loc, d});
        else if (d <= q->radius_m + band)
          matches.near_edge.push_back(geomatch::ScoredCandidate{*loc, d});
      }
    }
    const geomatch::BusinessDecision decision = geomatch::business_decide(
        matches, state_->dedup, state_->limiter, *q, ctx.now_ms(),
        state_->cfg);
    ++state_->decisions;
    for (const geomatch::ActionEvent& e : decision.events)
      if (e.kind != geomatch::ActionKind::Retire)
        state_->record(e, q->created_ms);
    ctx.emit("park", std::move(msg));
  }

 private:
  std::shared_ptr<PipelineState> state_;
};

/// Candidate location intake: upserts the index and, for a fresh location,
/// sends any live containing question that has not been tried on this
/// candidate yet.
class CandidateStage final : public Stage<GeoPayload> {
 public:
  explicit CandidateStage(std::shared_ptr<PipelineState> state)
      : state_(std::move(state)) {}

  StageKind kind() const override { return StageKind::Filter; }

  void on_message(GeoMessage msg, StageContext<GeoPayload>& ctx) override {
    const auto* c =
        std::get_if<geomatch::CandidateLocation>(&msg.envelope.payload);
    if (!c) {
      ctx.dead_letter(std::move(msg.envelope),
                      "TypeMismatch: candidate stage expects locations");
      return;
    }
    const geomatch::UpsertResult upsert = state_->candidates.upsert(*c);
    if (upsert.applied) {
      const std::int64_t now = ctx.now_ms();
      const auto hits = geomatch::match_candidate(state_->questions, *c);
      for (const geomatch::QuestionMatch& hit : hits) {
        if (now - hit.q.created_ms > hit.q.max_age_ms) continue;
        if (state_->dedup.already_sent(hit.q.question_id, c->candidate_id))
          continue;
        state_->dedup.mark_sent(hit.q.question_id, c->candidate_id);
        state_->record(
            geomatch::ActionEvent{geomatch::ActionKind::Send,
                                  hit.q.question_id, c->candidate_id, now},
            hit.q.created_ms);
      }
    }
    ctx.forward(std::move(msg));
  }

 private:
  std::shared_ptr<PipelineState> state_;
};

/// Answer intake: cancels the question's parked ticket and drops it from
/// the live index. Unknown or already-settled questions are a no-op.
class AnswerStage final : public Stage<GeoPayload> {
 public:
  using Canceller = std::function<bool(const ElementId&)>;

  explicit AnswerStage(std::shared_ptr<PipelineState> state)
      : state_(std::move(state)) {}

  void set_canceller(Canceller fn) { cancel_ = std::move(fn); }

  StageKind kind() const override { return StageKind::Filter; }

  void on_message(GeoMessage msg, StageContext<GeoPayload>& ctx) override {
    const auto* a = std::get_if<geomatch::Answer>(&msg.envelope.payload);
    if (!a) {
      ctx.dead_letter(std::move(msg.envelope),
                      "TypeMismatch: answer stage expects answers");
      return;
    }
    if (cancel_ && cancel_(a->question_id))
      state_->questions.remove(a->question_id);
    ctx.forward(std::move(msg));
  }

 private:
  std::shared_ptr<PipelineState> state_;
  Canceller cancel_;
};

/// The geo-matching reference topology:
///
///   ingest -+- question -> matcher -> logic -- park --> parked
///           |                ^                            |
///           |                +---------- feedback --------+
///           +- candidate -> locations -> done_candidates
///           +- answer    -> answers   -> done_answers
///
/// Questions circulate between matcher, logic, and the dehydrator until
/// they retire or an answer cancels them; candidate reports and answers
/// pass through to sinks.
class ReferencePipeline {
 public:
  ReferencePipeline(const geomatch::GeoMatchConfig& cfg, Clock& clock)
      : state_(std::make_shared<PipelineState>(cfg)),
        engine_(build(cfg), clock) {
    answer_stage_->set_canceller([this](const ElementId& question_id) {
      return engine_.cancel_dehydrated(kParkStage, question_id).has_value();
    });
  }

  static constexpr const char* kParkStage = "parked";

  void submit_question(const geomatch::Question& q) {
    GeoEnvelope env;
    env.element_id = q.question_id;
    env.event_time_ms = q.created_ms;
    env.payload = q;
    engine_.submit(std::move(env));
  }

  void submit_candidate(const geomatch::CandidateLocation& c) {
    GeoEnvelope env;
    env.element_id = c.candidate_id + "@" + std::to_string(c.reported_ms);
    env.event_time_ms = c.reported_ms;
    env.payload = c;
    engine_.submit(std::move(env));
  }

  void submit_answer(const geomatch::Answer& a, std::int64_t t_ms) {
    GeoEnvelope env;
    env.element_id = "answer:" + a.question_id + ":" + a.candidate_id + ":" +
                     std::to_string(t_ms);
    env.event_time_ms = t_ms;
    env.payload = a;
    engine_.submit(std::move(env));
  }

  Engine<GeoPayload>& engine() { return engine_; }
  PipelineState& state() { return *state_; }
  const PipelineState& state() const { return *state_; }

 private:
  Topology<GeoPayload> build(const geomatch::GeoMatchConfig& cfg) {
    auto matcher = std::make_shared<MatcherStage>(state_);
    auto logic = std::make_shared<LogicStage>(state_);
    auto locations = std::make_shared<CandidateStage>(state_);
    answer_stage_ = std::make_shared<AnswerStage>(state_);

    auto parked = std::make_shared<DehydratorStage<GeoPayload>>(
        cfg.dehydration,
        [base = cfg.dehydration](const GeoEnvelope& env)
            -> std::optional<DehydrationPolicy> {
          const auto* q = std::get_if<geomatch::Question>(&env.payload);
          if (!q) return std::nullopt;
          DehydrationPolicy policy = base;
          policy.max_age_ms = q->max_age_ms;
          return policy;
        });
    parked->set_on_retired(
        [state = state_](const GeoEnvelope& env, std::int64_t now_ms) {
          const auto* q = std::get_if<geomatch::Question>(&env.payload);
          if (!q) return;
          state->questions.remove(q->question_id);
          state->record(geomatch::ActionEvent{geomatch::ActionKind::Retire,
                                              q->question_id, "", now_ms},
                        q->created_ms);
        });

    TopologyBuilder<GeoPayload> b;
    b.add_stage("ingest", std::make_shared<IngestStage>());
    b.add_stage("matcher", matcher);
    b.add_stage("logic", logic);
    b.add_stage(kParkStage, parked);
    b.add_stage("locations", locations);
    b.add_stage("answers", answer_stage_);
    b.add_sink("done_candidates");
    b.add_sink("done_answers");
    b.add_edge("ingest", "matcher", "question");
    b.add_edge("ingest", "locations", "candidate");
    b.add_edge("ingest", "answers", "answer");
    b.add_edge("matcher", "logic", "to_logic");
    b.add_edge("logic", kParkStage, "park");
    b.add_feedback_edge(kParkStage, "matcher", "wake");
    b.add_edge("locations", "done_candidates", "out");
    b.add_edge("answers", "done_answers", "out");
    b.set_entry("ingest");
    return b.build();
  }

  std::shared_ptr<PipelineState> state_;
  std::shared_ptr<AnswerStage> answer_stage_;
  Engine<GeoPayload> engine_;
};

}  // namespace fsd::harness
