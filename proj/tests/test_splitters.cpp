#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsd/envelope.hpp"
#include "fsd/splitter.hpp"
#include "fsd/state_store.hpp"

using fsd::Envelope;
using fsd::Errc;
using fsd::Error;
using fsd::Origin;
using fsd::RouteDecision;
using fsd::StateStore;
using fsd::StoreTxn;

namespace {

Envelope<int> env(const std::string& id, int payload) {
  Envelope<int> e;
  e.element_id = id;
  e.payload = payload;
  e.event_time_ms = 77;
  return e;
}

}  // namespace

TEST_CASE("route decisions accumulate targets fluently") {
  auto d = RouteDecision<int>::to("a", env("e1", 1))
               .and_to("b", env("e2", 2))
               .and_to("c", env("e3", 3));
  REQUIRE(d.targets.size() == 3);
  REQUIRE(d.targets[0].route == "a");
  REQUIRE(d.targets[2].envelope.element_id == "e3");
}

TEST_CASE("derive builds a child with lineage and fresh admission") {
  auto parent = env("parent", 5);
  parent.retry_count = 3;
  parent.origin = Origin::Rehydrated;
  parent.first_seen_ms = 10;

  const auto child = fsd::derive(parent, "child", 50, 900);
  REQUIRE(child.element_id == "child");
  REQUIRE(child.payload == 50);
  REQUIRE(child.event_time_ms == parent.event_time_ms);
  REQUIRE(child.first_seen_ms == 900);
  REQUIRE(child.retry_count == 0);
  REQUIRE(child.origin == Origin::External);
  REQUIRE(child.parent_id == parent.element_id);
}

TEST_CASE("stateless split routes by payload alone") {
  auto by_parity = [](const Envelope<int>& e) {
    return RouteDecision<int>::to(e.payload % 2 == 0 ? "even" : "odd", e);
  };
  REQUIRE(fsd::stateless_split(by_parity, env("a", 4)).targets[0].route ==
          "even");
  REQUIRE(fsd::stateless_split(by_parity, env("b", 3)).targets[0].route ==
          "odd");
}

TEST_CASE("a splitter that produces no route is an error, not a drop") {
  auto silent = [](const Envelope<int>&) { return RouteDecision<int>{}; };
  try {
    fsd::stateless_split(silent, env("a", 1));
    FAIL("expected NoRouteProduced");
  } catch (const Error& err) {
    REQUIRE(err.code() == Errc::NoRouteProduced);
  }
}

TEST_CASE("stateless split is referentially transparent under reordering") {
  auto logic = [](const Envelope<int>& e) {
    return RouteDecision<int>::to("r" + std::to_string(e.payload % 3), e);
  };
  std::mt19937_64 rng(99);
  std::vector<Envelope<int>> batch;
  for (int i = 0; i < 150; ++i)
    batch.push_back(env("e" + std::to_string(i), static_cast<int>(rng() % 50)));

  auto routes_by_id = [&](const std::vector<Envelope<int>>& b) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : b)
      out.emplace_back(e.element_id,
                       fsd::stateless_split(logic, e).targets[0].route);
    std::sort(out.begin(), out.end());
    return out;
  };

  const auto before = routes_by_id(batch);
  std::shuffle(batch.begin(), batch.end(), rng);
  REQUIRE(routes_by_id(batch) == before);
}

TEST_CASE("memory split routes every third envelope to the sample route") {
  StateStore<int> store;
  auto every_third = [](StoreTxn<int>& txn, const Envelope<int>& e) {
    const int count = txn.get("count").value_or(0) + 1;
    txn.put("count", count);
    return RouteDecision<int>::to(count % 3 == 0 ? "sample" : "main", e);
  };

  std::vector<std::string> routes;
  for (int i = 1; i <= 9; ++i)
    routes.push_back(fsd::memory_split(store, every_third,
                                       env("e" + std::to_string(i), i))
                         .targets[0]
                         .route);
  REQUIRE(routes == std::vector<std::string>{"main", "main", "sample", "main",
                                             "main", "sample", "main", "main",
                                             "sample"});
  REQUIRE(store.get("count") == 9);
}

TEST_CASE("dedup splitter sends a pair once and drops repeats") {
  StateStore<int> store;
  auto dedup = [](StoreTxn<int>& txn, const Envelope<int>& e) {
    const std::string key = "pair:" + e.element_id;
    if (txn.get(key).has_value()) return RouteDecision<int>::to("drop", e);
    txn.put(key, 1);
    return RouteDecision<int>::to("send", e);
  };

  REQUIRE(fsd::memory_split(store, dedup, env("q1:c1", 0)).targets[0].route ==
          "send");
  REQUIRE(fsd::memory_split(store, dedup, env("q1:c1", 0)).targets[0].route ==
          "drop");
  REQUIRE(fsd::memory_split(store, dedup, env("q1:c2", 0)).targets[0].route ==
          "send");
}

TEST_CASE("failed splitter logic discards its buffered writes") {
  StateStore<int> store;
  store.put("count", 10);
  auto explodes = [](StoreTxn<int>& txn, const Envelope<int>& e) {
    txn.put("count", 999);
    if (e.payload > 0) throw std::runtime_error("logic bug");
    return RouteDecision<int>::to("main", e);
  };
  REQUIRE_THROWS_AS(fsd::memory_split(store, explodes, env("a", 1)),
                    std::runtime_error);
  REQUIRE(store.get("count") == 10);
}

TEST_CASE("memory split reruns its logic after a version conflict") {
  StateStore<int> store;
  store.put("k", 1);
  int attempts = 0;
  auto contended = [&](StoreTxn<int>& txn, const Envelope<int>& e) {
    ++attempts;
    const int seen = txn.get("k").value_or(0);
    if (attempts == 1) store.put("k", seen + 100);  // sneak a write in
    txn.put("k", seen + 1);
    return RouteDecision<int>::to("r", e);
  };

  const auto d = fsd::memory_split(store, contended, env("a", 0));
  REQUIRE(d.targets[0].route == "r");
  REQUIRE(attempts == 2);           // first run conflicted, second committed
  REQUIRE(store.get("k") == 102);   // rerun read the interloper's value
}

TEST_CASE("splitter instances sharing a store conserve routed counts") {
  StateStore<int> store;
  auto tally = [](StoreTxn<int>& txn, const Envelope<int>& e) {
    const std::string route = e.payload % 2 == 0 ? "even" : "odd";
    txn.put(route, txn.get(route).value_or(0) + 1);
    return RouteDecision<int>::to(route, e);
  };
  // Two logical instances of the same splitter, alternating inputs.
  for (int i = 0; i < 100; ++i)
    fsd::memory_split(store, tally, env("e" + std::to_string(i), i));

  REQUIRE(store.get("even").value_or(0) + store.get("odd").value_or(0) == 100);
  REQUIRE(store.get("even") == 50);
  REQUIRE(store.get("odd") == 50);
}
