#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <thread>

#include "fsd/clock.hpp"
#include "fsd/envelope.hpp"

using fsd::Clock;
using fsd::ClockMode;
using fsd::Envelope;
using fsd::Errc;
using fsd::Error;
using fsd::Origin;

TEST_CASE("simulated clock starts at zero and only moves on advance") {
  Clock clock(ClockMode::Simulated);
  REQUIRE(clock.mode() == ClockMode::Simulated);
  REQUIRE(clock.now_ms() == 0);
  REQUIRE(clock.now_ms() == 0);

  SECTION("advance(0) is the identity") {
    REQUIRE(clock.advance(0) == 0);
    REQUIRE(clock.now_ms() == 0);
  }

  SECTION("advances accumulate") {
    clock.advance(10);
    clock.advance(5);
    REQUIRE(clock.now_ms() == 15);
  }

  SECTION("advance_to moves to an absolute target") {
    REQUIRE(clock.advance_to(1234) == 1234);
    REQUIRE(clock.now_ms() == 1234);
    REQUIRE(clock.advance_to(1234) == 1234);  // no-op target
  }

  SECTION("time cannot move backwards") {
    clock.advance(100);
    REQUIRE_THROWS_AS(clock.advance(-1), Error);
    REQUIRE_THROWS_AS(clock.advance_to(99), Error);
    REQUIRE(clock.now_ms() == 100);
  }
}

TEST_CASE("wall clock measures from construction and rejects advance") {
  Clock clock(ClockMode::WallClock);
  const auto t0 = clock.now_ms();
  REQUIRE(t0 >= 0);
  std::this_thread::sleep_for(std::chrono::milliseconds(5));
  const auto t1 = clock.now_ms();
  REQUIRE(t1 >= t0);

  try {
    clock.advance(10);
    FAIL("advance on a wall clock must raise");
  } catch (const Error& err) {
    REQUIRE(err.code() == Errc::WallClockAdvance);
  }
}

TEST_CASE("envelope defaults match the external-admission contract") {
  Envelope<int> e;
  REQUIRE(e.retry_count == 0);
  REQUIRE(e.origin == Origin::External);
  REQUIRE(!e.parent_id.has_value());
  REQUIRE(e.event_time_ms == 0);
  REQUIRE(e.first_seen_ms == 0);
}

TEST_CASE("envelope carries late data without clamping") {
  // Event time may exceed first_seen (early data) or lag it (late data);
  // the envelope records both faithfully.
  Envelope<int> late;
  late.element_id = "x";
  late.event_time_ms = 50;
  late.first_seen_ms = 90;
  REQUIRE(late.event_time_ms < late.first_seen_ms);

  Envelope<int> early;
  early.event_time_ms = 90;
  early.first_seen_ms = 50;
  REQUIRE(early.event_time_ms > early.first_seen_ms);
}
