#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fsd/dehydrator.hpp"
#include "fsd/envelope.hpp"
#include "fsd/errors.hpp"

using fsd::DehydrationPolicy;
using fsd::Envelope;
using fsd::Errc;
using fsd::Error;
using fsd::next_interval;
using fsd::Origin;
using fsd::retirement_due;
using fsd::TimeIndexedStore;

namespace {

Envelope<int> env(const std::string& id, std::int64_t first_seen,
                  std::uint32_t retry = 0) {
  Envelope<int> e;
  e.element_id = id;
  e.payload = 0;
  e.event_time_ms = first_seen;
  e.first_seen_ms = first_seen;
  e.retry_count = retry;
  return e;
}

}  // namespace

TEST_CASE("wake intervals follow capped geometric backoff") {
  DehydrationPolicy p;  // base 1000, factor 2, cap 60000
  REQUIRE(next_interval(0, p) == 1000);
  REQUIRE(next_interval(3, p) == 8000);
  REQUIRE(next_interval(10, p) == 60000);
}

TEST_CASE("doubling backoff matches a repeated-multiplication oracle") {
  DehydrationPolicy p;
  p.base_interval_ms = 1000;
  p.backoff_factor = 2.0;
  p.max_interval_ms = 60'000;

  std::int64_t expected = p.base_interval_ms;
  for (std::uint32_t retry = 0; retry <= 63; ++retry) {
    CAPTURE(retry);
    REQUIRE(next_interval(retry, p) == expected);
    expected = std::min(expected * 2, p.max_interval_ms);
  }
}

TEST_CASE("backoff is non-decreasing and bounded for arbitrary policies") {
  const double factors[] = {1.0, 1.25, 1.5, 2.0, 3.0, 10.0};
  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 200; ++trial) {
    DehydrationPolicy p;
    p.base_interval_ms = 1 + static_cast<std::int64_t>(rng() % 1'000'000);
    p.backoff_factor = factors[rng() % 6];
    p.max_interval_ms =
        p.base_interval_ms + static_cast<std::int64_t>(rng() % 1'000'000'000);
    p.validate();

    std::int64_t prev = 0;
    for (std::uint32_t retry = 0; retry <= 100; ++retry) {
      const std::int64_t got = next_interval(retry, p);
      CAPTURE(trial, retry, p.base_interval_ms, p.backoff_factor);
      REQUIRE(got >= prev);
      REQUIRE(got >= p.base_interval_ms);
      REQUIRE(got <= p.max_interval_ms);
      prev = got;
    }
  }
}

TEST_CASE("retirement triggers strictly past the age horizon") {
  DehydrationPolicy p;
  p.max_age_ms = 10'000;
  const auto e = env("e", 0);
  REQUIRE_FALSE(retirement_due(e, p, 10'000));  // exactly at the horizon
  REQUIRE(retirement_due(e, p, 10'001));
}

TEST_CASE("retirement triggers strictly past the retry budget") {
  DehydrationPolicy p;
  p.max_retries = 3;
  REQUIRE_FALSE(retirement_due(env("e", 0, 3), p, 0));
  REQUIRE(retirement_due(env("e", 0, 4), p, 0));

  DehydrationPolicy unlimited;  // no max_retries: only age can retire
  REQUIRE_FALSE(retirement_due(env("e", 0, 4'000'000), unlimited, 0));
}

TEST_CASE("policy validation rejects degenerate settings") {
  DehydrationPolicy p;

  p.base_interval_ms = 0;
  REQUIRE_THROWS_AS(p.validate(), Error);
  p = {};

  p.max_interval_ms = p.base_interval_ms - 1;
  REQUIRE_THROWS_AS(p.validate(), Error);
  p = {};

  p.backoff_factor = 0.99;
  REQUIRE_THROWS_AS(p.validate(), Error);
  p.backoff_factor = std::nan("");
  REQUIRE_THROWS_AS(p.validate(), Error);
  p = {};

  p.max_age_ms = -1;
  try {
    p.validate();
    FAIL("expected BadPolicy");
  } catch (const Error& err) {
    REQUIRE(err.code() == Errc::BadPolicy);
  }

  REQUIRE_THROWS_AS(TimeIndexedStore<int>(DehydrationPolicy{.max_age_ms = -1}),
                    Error);
}

TEST_CASE("dehydrate parks an element until its computed wake time") {
  TimeIndexedStore<int> store;
  const auto result = store.dehydrate(env("e1", 500), 500);
  REQUIRE(result.ticket.has_value());
  REQUIRE_FALSE(result.retired.has_value());
  REQUIRE(result.ticket->element_id == "e1");
  REQUIRE(result.ticket->wake_at_ms == 1500);  // 500 + base interval
  REQUIRE(store.earliest_wake_ms() == 1500);
  REQUIRE(store.has_ticket("e1"));
  REQUIRE(store.size() == 1);
}

TEST_CASE("dehydrating an already-retired element hands it straight back") {
  DehydrationPolicy p;
  p.max_age_ms = 1'000;
  TimeIndexedStore<int> store(p);
  const auto result = store.dehydrate(env("old", 0), 5'000);
  REQUIRE_FALSE(result.ticket.has_value());
  REQUIRE(result.retired.has_value());
  REQUIRE(result.retired->element_id == "old");
  REQUIRE(store.size() == 0);
}

TEST_CASE("an element cannot hold two live tickets") {
  TimeIndexedStore<int> store;
  store.dehydrate(env("e1", 0), 0);
  try {
    store.dehydrate(env("e1", 0), 10);
    FAIL("expected DuplicateTicket");
  } catch (const Error& err) {
    REQUIRE(err.code() == Errc::DuplicateTicket);
  }
  // After the wake fires the id is free again.
  store.poll(1'000);
  REQUIRE(store.dehydrate(env("e1", 0), 1'000).ticket.has_value());
}

TEST_CASE("poll releases nothing before the wake boundary and all of it at") {
  DehydrationPolicy p;
  p.base_interval_ms = 10'000;
  TimeIndexedStore<int> store(p);
  store.dehydrate(env("e1", 0), 0);

  REQUIRE(store.poll(9'999).rehydrated.empty());
  const auto due = store.poll(10'000);
  REQUIRE(due.rehydrated.size() == 1);
  REQUIRE(due.rehydrated[0].element_id == "e1");
  REQUIRE(due.rehydrated[0].retry_count == 1);
  REQUIRE(due.rehydrated[0].origin == Origin::Rehydrated);
  REQUIRE(store.size() == 0);
}

TEST_CASE("simultaneous wakes come back ordered by element id") {
  TimeIndexedStore<int> store;
  for (const char* id : {"zeta", "alpha", "mid"})
    store.dehydrate(env(id, 0), 0);

  const auto due = store.poll(1'000);
  REQUIRE(due.rehydrated.size() == 3);
  REQUIRE(due.rehydrated[0].element_id == "alpha");
  REQUIRE(due.rehydrated[1].element_id == "mid");
  REQUIRE(due.rehydrated[2].element_id == "zeta");
}

TEST_CASE("wakes interleave earlier times before later ones") {
  TimeIndexedStore<int> store;
  store.dehydrate(env("late", 0, 1), 0);   // retry 1: wake at 2000
  store.dehydrate(env("early", 0, 0), 0);  // retry 0: wake at 1000
  const auto due = store.poll(5'000);
  REQUIRE(due.rehydrated.size() == 2);
  REQUIRE(due.rehydrated[0].element_id == "early");
  REQUIRE(due.rehydrated[1].element_id == "late");
}

TEST_CASE("an element that ages out while parked retires at poll time") {
  DehydrationPolicy p;
  p.max_age_ms = 1'500;
  TimeIndexedStore<int> store(p);
  // Parked at age 1000 (inside the horizon), wakes at 2000 (outside it).
  REQUIRE(store.dehydrate(env("e1", 0), 1'000).ticket.has_value());

  const auto due = store.poll(2'000);
  REQUIRE(due.rehydrated.empty());
  REQUIRE(due.retired.size() == 1);
  REQUIRE(due.retired[0].element_id == "e1");
  REQUIRE(due.retired[0].retry_count == 1);
}

TEST_CASE("cancel removes the ticket and suppresses the wake") {
  TimeIndexedStore<int> store;
  store.dehydrate(env("e1", 0), 0);

  REQUIRE_FALSE(store.cancel("missing").has_value());
  const auto cancelled = store.cancel("e1");
  REQUIRE(cancelled.has_value());
  REQUIRE(cancelled->envelope.element_id == "e1");
  REQUIRE_FALSE(store.cancel("e1").has_value());  // idempotent absence

  const auto due = store.poll(60'000);
  REQUIRE(due.rehydrated.empty());
  REQUIRE(due.retired.empty());
}

TEST_CASE("a per-element override replaces the whole policy") {
  TimeIndexedStore<int> store;  // default: base 1000, max_age 900000
  DehydrationPolicy slow;
  slow.base_interval_ms = 5'000;
  slow.max_interval_ms = 5'000;
  slow.max_age_ms = 6'000;

  const auto r = store.dehydrate(env("e1", 0), 0, slow);
  REQUIRE(r.ticket->wake_at_ms == 5'000);  // override interval, not default

  // Poll after the override's age horizon: the override's retirement rule
  // applies even though the store default would have kept it alive.
  store.poll(4'999);
  const auto due = store.poll(7'000);
  REQUIRE(due.rehydrated.empty());
  REQUIRE(due.retired.size() == 1);

  DehydrationPolicy bad;
  bad.backoff_factor = 0.5;
  REQUIRE_THROWS_AS(store.dehydrate(env("e2", 0), 0, bad), Error);
}

TEST_CASE("indexes stay consistent through mixed operation churn") {
  TimeIndexedStore<int> store;
  std::mt19937_64 rng(7);
  std::int64_t now = 0;
  std::size_t parked = 0;

  for (int op = 0; op < 2'000; ++op) {
    const std::string id = "e" + std::to_string(rng() % 64);
    switch (rng() % 3) {
      case 0:
        if (!store.has_ticket(id)) {
          store.dehydrate(env(id, now), now);
          ++parked;
        }
        break;
      case 1:
        if (store.cancel(id).has_value()) --parked;
        break;
      default: {
        now += static_cast<std::int64_t>(rng() % 1'500);
        const auto due = store.poll(now);
        parked -= due.rehydrated.size() + due.retired.size();
        break;
      }
    }
    REQUIRE(store.size() == parked);
    REQUIRE(store.consistent());
  }
}
