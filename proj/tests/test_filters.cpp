#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fsd/envelope.hpp"
#include "fsd/filter.hpp"

using fsd::AggregationFilterConfig;
using fsd::DecisionKind;
using fsd::Envelope;
using fsd::FilterDecision;
using fsd::ScoredElement;
using fsd::TieredTopX;
using fsd::TopXAggregator;

namespace {

Envelope<double> env(const std::string& id, double payload) {
  Envelope<double> e;
  e.element_id = id;
  e.payload = payload;
  return e;
}

AggregationFilterConfig<double> cfg(std::size_t x) {
  AggregationFilterConfig<double> c;
  c.x = x;
  c.score_fn = [](const Envelope<double>& e) { return e.payload; };
  return c;
}

std::vector<double> scores_of(const FilterDecision<double>& d) {
  std::vector<double> out;
  for (const auto& s : d.candidate_set) out.push_back(s.score);
  return out;
}

std::vector<std::string> ids_of(const FilterDecision<double>& d) {
  std::vector<std::string> out;
  for (const auto& s : d.candidate_set) out.push_back(s.element.element_id);
  return out;
}

/// Independent top-X: full history, sorted by (score desc, id asc).
std::vector<std::pair<double, std::string>> brute_top_x(
    std::vector<std::pair<double, std::string>> seen, std::size_t x) {
  std::sort(seen.begin(), seen.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              return a.second < b.second;
            });
  if (seen.size() > x) seen.resize(x);
  return seen;
}

}  // namespace

TEST_CASE("stateless filter applies a pure predicate") {
  auto positive_radius = [](const Envelope<double>& e) {
    return e.payload > 0.0;
  };
  REQUIRE(fsd::stateless_filter(positive_radius, env("a", 500.0)).is_pass());
  REQUIRE(fsd::stateless_filter(positive_radius, env("b", 0.0)).is_drop());
}

TEST_CASE("stateless filter decisions are order independent") {
  auto pred = [](const Envelope<double>& e) { return e.payload >= 10.0; };
  std::mt19937_64 rng(42);
  std::vector<Envelope<double>> batch;
  for (int i = 0; i < 200; ++i)
    batch.push_back(env("e" + std::to_string(i),
                        static_cast<double>(rng() % 20)));

  auto decide_multiset = [&](const std::vector<Envelope<double>>& b) {
    std::multiset<std::pair<std::string, bool>> out;
    for (const auto& e : b)
      out.emplace(e.element_id, fsd::stateless_filter(pred, e).is_pass());
    return out;
  };

  const auto before = decide_multiset(batch);
  std::shuffle(batch.begin(), batch.end(), rng);
  REQUIRE(decide_multiset(batch) == before);
}

TEST_CASE("filter decision constructors enforce their shapes") {
  REQUIRE(FilterDecision<double>::pass().kind == DecisionKind::Pass);
  REQUIRE(FilterDecision<double>::drop().kind == DecisionKind::Drop);

  const auto soft = FilterDecision<double>::soft(1.5, 0.25);
  REQUIRE(soft.kind == DecisionKind::Soft);
  REQUIRE(soft.score.has_value());
  REQUIRE(*soft.score == 1.5);
  REQUIRE(soft.margin_of_error == 0.25);

  REQUIRE_THROWS_AS(FilterDecision<double>::soft(1.0, -0.1), fsd::Error);
}

TEST_CASE("top-X aggregation over scores [5,3,9,1] with X=2 yields [9,5]") {
  TopXAggregator<double> agg(cfg(2));
  agg.step(env("e1", 5));
  agg.step(env("e2", 3));
  agg.step(env("e3", 9));
  const auto last = agg.step(env("e4", 1));
  REQUIRE(last.kind == DecisionKind::Soft);
  REQUIRE(scores_of(last) == std::vector<double>{9, 5});
  REQUIRE(ids_of(last) == std::vector<std::string>{"e3", "e1"});
  REQUIRE(agg.seen_count() == 4);
}

TEST_CASE("top-X with X=1 and a single element keeps that element") {
  TopXAggregator<double> agg(cfg(1));
  const auto d = agg.step(env("only", 7));
  REQUIRE(scores_of(d) == std::vector<double>{7});
}

TEST_CASE("equal scores break ties toward the lowest element ids") {
  TopXAggregator<double> agg(cfg(3));
  for (const char* id : {"zeta", "alpha", "mid", "beta", "omega"})
    agg.step(env(id, 4.0));
  REQUIRE(ids_of(agg.step(env("aardvark", 4.0))) ==
          std::vector<std::string>{"aardvark", "alpha", "beta"});
}

TEST_CASE("re-observing an element replaces its retained entry") {
  TopXAggregator<double> agg(cfg(2));
  agg.step(env("a", 9));
  agg.step(env("b", 5));
  // "a" drops to the bottom; "b" is now the best retained.
  const auto d = agg.step(env("a", 1));
  REQUIRE(ids_of(d) == std::vector<std::string>{"b", "a"});
  REQUIRE(scores_of(d) == std::vector<double>{5, 1});
}

TEST_CASE("an evicted element competes again as a fresh candidate") {
  TopXAggregator<double> agg(cfg(1));
  agg.step(env("a", 5));
  agg.step(env("b", 9));  // evicts a
  const auto d = agg.step(env("a", 20));
  REQUIRE(ids_of(d) == std::vector<std::string>{"a"});
  REQUIRE(scores_of(d) == std::vector<double>{20});
}

TEST_CASE("aggregator rejects degenerate configs") {
  AggregationFilterConfig<double> bad_x;
  bad_x.x = 0;
  bad_x.score_fn = [](const Envelope<double>&) { return 0.0; };
  REQUIRE_THROWS_AS(TopXAggregator<double>(bad_x), fsd::Error);

  AggregationFilterConfig<double> no_fn;
  no_fn.x = 2;
  REQUIRE_THROWS_AS(TopXAggregator<double>(no_fn), fsd::Error);
}

TEST_CASE("candidate set equals full-history top-X at every step") {
  std::mt19937_64 rng(20260814);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t x = 1 + rng() % 8;
    TopXAggregator<double> agg(cfg(x));
    std::vector<std::pair<double, std::string>> seen;
    const int n = 20 + static_cast<int>(rng() % 200);
    for (int i = 0; i < n; ++i) {
      const std::string id = "e" + std::to_string(i);
      const double score = static_cast<double>(rng() % 40);  // ties likely
      seen.emplace_back(score, id);
      const auto d = agg.step(env(id, score));
      const auto expect = brute_top_x(seen, x);
      REQUIRE(d.candidate_set.size() == expect.size());
      for (std::size_t k = 0; k < expect.size(); ++k) {
        REQUIRE(d.candidate_set[k].score == expect[k].first);
        REQUIRE(d.candidate_set[k].element.element_id == expect[k].second);
      }
    }
  }
}

TEST_CASE("two tiers X=4 then X=2 over [8,1,6,3,9,2] settle on [9,8]") {
  TieredTopX<double> tiers({cfg(4), cfg(2)});
  REQUIRE(tiers.tier_count() == 2);
  FilterDecision<double> d;
  int i = 0;
  for (double score : {8, 1, 6, 3, 9, 2})
    d = tiers.step(env("e" + std::to_string(++i), score));
  REQUIRE(scores_of(d) == std::vector<double>{9, 8});
}

TEST_CASE("a single tier composes to the plain aggregator") {
  TieredTopX<double> tiered({cfg(3)});
  TopXAggregator<double> plain(cfg(3));
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const auto e = env("e" + std::to_string(i),
                       static_cast<double>(rng() % 25));
    const auto a = tiered.step(e);
    const auto b = plain.step(e);
    REQUIRE(scores_of(a) == scores_of(b));
    REQUIRE(ids_of(a) == ids_of(b));
  }
}

TEST_CASE("the narrowest tier bounds the final set size") {
  TieredTopX<double> tiers({cfg(1), cfg(5)});
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const auto d = tiers.step(env("e" + std::to_string(i),
                                  static_cast<double>(rng() % 100)));
    REQUIRE(d.candidate_set.size() == 1);
  }
}

TEST_CASE("non-increasing tier widths match a single global top-X") {
  std::mt19937_64 rng(300);
  for (int trial = 0; trial < 40; ++trial) {
    // Random non-increasing width chain, 2..4 tiers.
    std::vector<std::size_t> widths;
    std::size_t w = 2 + rng() % 12;
    const std::size_t tiers_n = 2 + rng() % 3;
    for (std::size_t t = 0; t < tiers_n; ++t) {
      widths.push_back(w);
      if (w > 1) w -= rng() % w;
      if (w < 1) w = 1;
    }
    std::vector<AggregationFilterConfig<double>> chain;
    for (std::size_t width : widths) chain.push_back(cfg(width));
    TieredTopX<double> tiered(std::move(chain));
    TopXAggregator<double> global(cfg(widths.back()));

    const int n = 30 + static_cast<int>(rng() % 300);
    FilterDecision<double> a, b;
    for (int i = 0; i < n; ++i) {
      const auto e = env("e" + std::to_string(i),
                         static_cast<double>(rng() % 50));
      a = tiered.step(e);
      b = global.step(e);
    }
    REQUIRE(scores_of(a) == scores_of(b));
    REQUIRE(ids_of(a) == ids_of(b));
  }
}

TEST_CASE("an empty tier list is rejected") {
  REQUIRE_THROWS_AS(TieredTopX<double>({}), fsd::Error);
}

TEST_CASE("filters never mutate the envelope payload") {
  TopXAggregator<double> agg(cfg(2));
  auto e = env("keep", 12.5);
  agg.step(e);
  REQUIRE(e.payload == 12.5);
  const auto d = agg.step(env("other", 1.0));
  REQUIRE(d.candidate_set[0].element.payload == 12.5);
}
