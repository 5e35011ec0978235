#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "fsd/geo.hpp"
#include "fsd/geomatch.hpp"
#include "fsd/rtree.hpp"

using fsd::geo::haversine_m;
using fsd::geo::LatLonRect;
using fsd::geo::RTree;
using fsd::geomatch::CandidateIndex;
using fsd::geomatch::CandidateLocation;
using fsd::geomatch::Question;
using fsd::geomatch::QuestionIndex;

namespace {

LatLonRect random_rect(std::mt19937_64& rng, double max_extent_deg) {
  std::uniform_real_distribution<double> lat(-80, 80), lon(-170, 170),
      extent(0, max_extent_deg);
  const double la = lat(rng), lo = lon(rng);
  return LatLonRect{la, la + extent(rng), lo, lo + extent(rng)};
}

CandidateLocation cand(const std::string& id, double lat, double lon,
                       std::int64_t reported_ms) {
  return CandidateLocation{id, lat, lon, reported_ms};
}

Question quest(const std::string& id, double lat, double lon, double radius) {
  return Question{id, lat, lon, radius, 0, 900'000};
}

}  // namespace

TEST_CASE("window queries agree with a linear scan") {
  for (std::size_t capacity : {4u, 5u, 16u}) {
    std::mt19937_64 rng(1000 + capacity);
    RTree<int> tree(capacity);
    std::vector<LatLonRect> rects;
    const int n = capacity == 16 ? 2000 : 600;
    for (int i = 0; i < n; ++i) {
      rects.push_back(random_rect(rng, 5.0));
      tree.insert(rects.back(), i);
    }
    REQUIRE(tree.size() == rects.size());

    for (int w = 0; w < 50; ++w) {
      const LatLonRect window = random_rect(rng, 20.0);
      std::vector<int> expected;
      for (int i = 0; i < n; ++i)
        if (rects[i].intersects(window)) expected.push_back(i);

      std::vector<int> got;
      tree.query(window, [&](const LatLonRect&, const int& v) {
        got.push_back(v);
      });
      std::sort(got.begin(), got.end());
      CAPTURE(capacity, w);
      REQUIRE(got == expected);
    }
  }
}

TEST_CASE("for_each visits every entry and clear empties the tree") {
  RTree<int> tree(4);
  for (int i = 0; i < 100; ++i) {
    const double step = static_cast<double>(i) * 0.5;
    tree.insert(LatLonRect{step, step + 0.1, step, step + 0.1}, i);
  }
  std::vector<int> seen;
  tree.for_each([&](const LatLonRect&, const int& v) { seen.push_back(v); });
  std::sort(seen.begin(), seen.end());
  REQUIRE(seen.size() == 100);
  for (int i = 0; i < 100; ++i) REQUIRE(seen[i] == i);

  tree.clear();
  REQUIRE(tree.size() == 0);
  int visits = 0;
  tree.for_each([&](const LatLonRect&, const int&) { ++visits; });
  REQUIRE(visits == 0);
}

TEST_CASE("duplicate and degenerate rectangles are retrievable") {
  RTree<int> tree(4);
  const LatLonRect point{10, 10, 20, 20};
  for (int i = 0; i < 25; ++i) tree.insert(point, i);
  int visits = 0;
  tree.query(point, [&](const LatLonRect&, const int&) { ++visits; });
  REQUIRE(visits == 25);
}

TEST_CASE("candidate index keeps only the latest location per candidate") {
  CandidateIndex index;

  auto first = index.upsert(cand("c1", 10.0, 20.0, 100));
  REQUIRE(first.applied);
  REQUIRE_FALSE(first.previous.has_value());

  auto newer = index.upsert(cand("c1", 11.0, 21.0, 200));
  REQUIRE(newer.applied);
  REQUIRE(newer.previous->reported_ms == 100);

  auto stale = index.upsert(cand("c1", 12.0, 22.0, 150));
  REQUIRE_FALSE(stale.applied);
  REQUIRE(stale.previous->reported_ms == 200);
  REQUIRE(index.find("c1")->lat_deg == 11.0);

  // Same-timestamp reports apply (last writer wins at equal times).
  auto tied = index.upsert(cand("c1", 13.0, 23.0, 200));
  REQUIRE(tied.applied);
  REQUIRE(index.find("c1")->lat_deg == 13.0);
  REQUIRE(index.size() == 1);

  // The superseded tree entries must never resurface in queries.
  std::vector<std::string> hits;
  index.query_cap(11.0, 21.0, 500.0, [&](const CandidateLocation& c) {
    hits.push_back(c.candidate_id);
  });
  REQUIRE(hits.empty());  // the live location moved to (13, 23)

  index.query_cap(13.0, 23.0, 500.0, [&](const CandidateLocation& c) {
    hits.push_back(c.candidate_id);
    REQUIRE(c.lat_deg == 13.0);
  });
  REQUIRE(hits == std::vector<std::string>{"c1"});
}

TEST_CASE("candidate index queries stay exact through rebuild churn") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> lat(-60, 60), lon(-120, 120);
  CandidateIndex index(8);
  std::vector<CandidateLocation> truth;

  const int kCandidates = 40;
  for (int round = 0; round < 30; ++round) {
    for (int i = 0; i < kCandidates; ++i) {
      const auto c = cand("c" + std::to_string(i), lat(rng), lon(rng),
                          round * 10);
      index.upsert(c);
      if (static_cast<int>(truth.size()) <= i)
        truth.push_back(c);
      else
        truth[i] = c;
    }
  }
  REQUIRE(index.size() == kCandidates);

  // 1200 upserts over 40 ids: far past the rebuild threshold, so queries
  // below exercise the rebuilt tree.
  for (int probe = 0; probe < 40; ++probe) {
    const double qlat = lat(rng), qlon = lon(rng);
    const double radius = 100'000.0 + 900'000.0 * probe;

    std::vector<std::string> got;
    index.query_cap(qlat, qlon, radius, [&](const CandidateLocation& c) {
      got.push_back(c.candidate_id);
      REQUIRE(c.reported_ms == 290);  // only final-round locations are live
    });
    std::sort(got.begin(), got.end());
    REQUIRE(std::adjacent_find(got.begin(), got.end()) == got.end());

    // Pre-filter property: every true match must be visited.
    for (const auto& c : truth) {
      if (haversine_m(qlat, qlon, c.lat_deg, c.lon_deg) > radius) continue;
      CAPTURE(probe, c.candidate_id);
      REQUIRE(std::binary_search(got.begin(), got.end(), c.candidate_id));
    }
  }
}

TEST_CASE("question index serves point probes across add/remove churn") {
  QuestionIndex index(8);
  std::vector<Question> questions;
  for (int i = 0; i < 80; ++i) {
    // A row of non-overlapping 10km caps along the equator, 1 degree apart.
    questions.push_back(
        quest("q" + std::to_string(i), 0.0, -100.0 + i * 1.0, 10'000.0));
    index.add(questions.back());
  }
  REQUIRE(index.size() == 80);
  REQUIRE(index.contains("q5"));
  REQUIRE(index.find("q5")->lon_deg == -95.0);
  REQUIRE(index.find("missing") == nullptr);

  // Re-adding a live question is a no-op, not a duplicate.
  index.add(questions[5]);
  REQUIRE(index.size() == 80);

  for (int i = 0; i < 80; i += 2) REQUIRE(index.remove("q" + std::to_string(i)));
  REQUIRE_FALSE(index.remove("q0"));
  REQUIRE(index.size() == 40);  // 40 removals: past the rebuild threshold

  for (int i = 0; i < 80; ++i) {
    std::vector<std::string> hits;
    index.query_point(0.0, -100.0 + i * 1.0, [&](const Question& q) {
      hits.push_back(q.question_id);
    });
    if (i % 2 == 0) {
      REQUIRE(hits.empty());
    } else {
      REQUIRE(hits == std::vector<std::string>{"q" + std::to_string(i)});
    }
  }
}

TEST_CASE("a question straddling the antimeridian is found once per side") {
  QuestionIndex index;
  index.add(quest("wrap", 0.0, 179.99, 5'000.0));

  std::vector<std::string> east_hits;
  index.query_point(0.0, 179.995, [&](const Question& q) {
    east_hits.push_back(q.question_id);
  });
  REQUIRE(east_hits == std::vector<std::string>{"wrap"});

  std::vector<std::string> west_hits;
  index.query_point(0.0, -179.98, [&](const Question& q) {
    west_hits.push_back(q.question_id);
  });
  REQUIRE(west_hits == std::vector<std::string>{"wrap"});

  REQUIRE(index.remove("wrap"));
  index.query_point(0.0, 179.995, [&](const Question&) {
    FAIL("removed question must not be visited");
  });
}
