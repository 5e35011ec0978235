#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fsd/harness/scenario.hpp"

namespace fsd::harness {

/// Size and placement profile for one generated scenario. Derived from the
/// seed so a campaign over consecutive seeds sweeps small dense cases, the
/// occasional medium case, polar and antimeridian regions, and a couple of
/// budget-limit cases.
struct GenProfile {
  std::uint64_t seed = 0;
  std::size_t candidates = 100;
  std::size_t questions = 10;
  double center_lat = 0.0;
  double center_lon = 0.0;
  /// Horizontal scatter of candidates around the center, meters.
  double scatter_m = 20000.0;
  /// Question radius range, meters.
  double radius_min_m = 200.0;
  double radius_max_m = 15000.0;
  /// Question lifetime range, ms.
  std::int64_t max_age_min_ms = 5000;
  std::int64_t max_age_max_ms = 90000;
  /// Whether the tail of the scenario advances past every lifetime.
  bool retire_tail = true;
};

namespace genrand {
// Thin deterministic helpers over mt19937_64. Distribution classes are
// not pinned down by the standard, so draws are derived from raw engine
// output only.

inline std::uint64_t below(std::mt19937_64& rng, std::uint64_t bound) {
  return bound == 0 ? 0 : rng() % bound;
}

inline std::int64_t range(std::mt19937_64& rng, std::int64_t lo,
                          std::int64_t hi) {
  if (hi <= lo) return lo;
  return lo + static_cast<std::int64_t>(
                  below(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

inline double unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double real(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * unit(rng);
}

inline bool chance(std::mt19937_64& rng, double p) {
  return unit(rng) < p;
}

/// Snaps to the 1e-6 degree grid so text formatting round-trips exactly.
inline double snap(double deg) {
  return static_cast<double>(std::llround(deg * 1e6)) / 1e6;
}
}  // namespace genrand

inline GenProfile profile_for_seed(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  GenProfile p;
  p.seed = seed;
  if (seed % 50 == 49) {
    // Budget-limit case: many candidates, short lifetimes.
    p.candidates = 10000;
    p.questions = 1000;
    p.max_age_min_ms = 4000;
    p.max_age_max_ms = 15000;
    p.scatter_m = 60000.0;
  } else if (seed % 10 == 7) {
    p.candidates = 1000;
    p.questions = 100;
    p.max_age_min_ms = 5000;
    p.max_age_max_ms = 45000;
    p.scatter_m = 40000.0;
  } else {
    p.candidates = 30 + genrand::below(rng, 270);
    p.questions = 3 + genrand::below(rng, 28);
  }
  if (seed % 7 == 3) {
    // Polar clamp territory.
    p.center_lat = genrand::real(rng, 74.0, 84.0);
    if (genrand::chance(rng, 0.5)) p.center_lat = -p.center_lat;
    p.center_lon = genrand::real(rng, -179.0, 179.0);
  } else if (seed % 11 == 5) {
    // Antimeridian straddle.
    p.center_lat = genrand::real(rng, -55.0, 55.0);
    p.center_lon =
        genrand::chance(rng, 0.5) ? genrand::real(rng, 179.3, 179.95)
                                  : genrand::real(rng, -179.95, -179.3);
  } else {
    p.center_lat = genrand::real(rng, -60.0, 60.0);
    p.center_lon = genrand::real(rng, -179.0, 179.0);
  }
  p.retire_tail = seed % 3 != 1;
  return p;
}

namespace detail {

/// Offsets a coordinate by roughly meters-scaled degrees, clamped to valid
/// ranges with longitude wrapped.
inline void offset_coord(double& lat, double& lon, double east_m,
                         double north_m) {
  lat += north_m / 111320.0;
  if (lat > 89.9) lat = 89.9;
  if (lat < -89.9) lat = -89.9;
  const double scale = std::cos(geo::deg_to_rad(lat));
  lon += east_m / (111320.0 * (scale < 0.05 ? 0.05 : scale));
  while (lon >= 180.0) lon -= 360.0;
  while (lon < -180.0) lon += 360.0;
}

inline double clamp_lon(double lon) {
  if (lon >= 180.0) return 179.999999;
  if (lon < -180.0) return -180.0;
  return lon;
}

}  // namespace detail

/// Deterministic random scenario: candidate seeding, interleaved question
/// arrivals, location updates (random walks), blind answers, and clock
/// advances, optionally ending with a tail advance that retires everything
/// still open.
inline Scenario generate_scenario(const GenProfile& p) {
  std::mt19937_64 rng(p.seed * 0x2545f4914f6cdd1dull + 1);
  Scenario s;
  std::int64_t cursor = 0;

  struct Cand {
    std::string id;
    double lat, lon;
  };
  std::vector<Cand> cands;
  cands.reserve(p.candidates);
  std::vector<std::string> question_ids;
  std::vector<std::string> open_questions;
  std::int64_t latest_max_age = 0;

  auto emit_candidate = [&](Cand& c) {
    c.lat = genrand::snap(c.lat);
    c.lon = genrand::snap(detail::clamp_lon(c.lon));
    s.events.push_back(CandidateEvent{geomatch::CandidateLocation{
        c.id, c.lat, c.lon, cursor}});
  };

  // Seed an initial population of candidates.
  const std::size_t initial = p.candidates * 3 / 5 + 1;
  for (std::size_t i = 0; i < initial && i < p.candidates; ++i) {
    Cand c;
    c.id = "c" + std::to_string(cands.size() + 1);
    c.lat = p.center_lat;
    c.lon = p.center_lon;
    detail::offset_coord(c.lat, c.lon,
                         genrand::real(rng, -p.scatter_m, p.scatter_m),
                         genrand::real(rng, -p.scatter_m, p.scatter_m));
    cands.push_back(c);
    emit_candidate(cands.back());
    if (genrand::chance(rng, 0.2))
      cursor += genrand::range(rng, 1, 40);
  }

  // Interleave question arrivals, new candidates, walks, and answers.
  std::size_t questions_left = p.questions;
  while (questions_left > 0) {
    cursor += genrand::range(rng, 0, 1500);
    const double roll = genrand::unit(rng);
    if (roll < 0.45) {
      geomatch::Question q;
      q.question_id = "q" + std::to_string(question_ids.size() + 1);
      double lat = p.center_lat, lon = p.center_lon;
      detail::offset_coord(lat, lon,
                           genrand::real(rng, -p.scatter_m, p.scatter_m),
                           genrand::real(rng, -p.scatter_m, p.scatter_m));
      q.lat_deg = genrand::snap(lat);
      q.lon_deg = genrand::snap(detail::clamp_lon(lon));
      q.radius_m = genrand::snap(
          genrand::real(rng, p.radius_min_m, p.radius_max_m));
      q.created_ms = cursor;
      q.max_age_ms = genrand::range(rng, p.max_age_min_ms, p.max_age_max_ms);
      if (q.max_age_ms > latest_max_age) latest_max_age = q.max_age_ms;
      question_ids.push_back(q.question_id);
      open_questions.push_back(q.question_id);
      s.events.push_back(QuestionEvent{q});
      --questions_left;
    } else if (roll < 0.75 && !cands.empty()) {
      // Walk an existing candidate.
      Cand& c = cands[genrand::below(rng, cands.size())];
      detail::offset_coord(c.lat, c.lon,
                           genrand::real(rng, -p.scatter_m / 4,
                                         p.scatter_m / 4),
                           genrand::real(rng, -p.scatter_m / 4,
                                         p.scatter_m / 4));
      emit_candidate(c);
    } else if (roll < 0.85 && cands.size() < p.candidates) {
      Cand c;
      c.id = "c" + std::to_string(cands.size() + 1);
      c.lat = p.center_lat;
      c.lon = p.center_lon;
      detail::offset_coord(c.lat, c.lon,
                           genrand::real(rng, -p.scatter_m, p.scatter_m),
                           genrand::real(rng, -p.scatter_m, p.scatter_m));
      cands.push_back(c);
      emit_candidate(cands.back());
    } else if (roll < 0.93 && !open_questions.empty() && !cands.empty()) {
      const std::size_t pick = genrand::below(rng, open_questions.size());
      const std::string qid = open_questions[pick];
      open_questions.erase(open_questions.begin() +
                           static_cast<std::ptrdiff_t>(pick));
      const std::string cid =
          cands[genrand::below(rng, cands.size())].id;
      s.events.push_back(AnswerEvent{qid, cid, cursor});
    } else {
      s.events.push_back(
          AdvanceEvent{genrand::range(rng, 500, 8000)});
      cursor += std::get<AdvanceEvent>(s.events.back()).delta_ms;
      continue;
    }
    if (genrand::chance(rng, 0.15)) {
      const std::int64_t dt = genrand::range(rng, 200, 5000);
      s.events.push_back(AdvanceEvent{dt});
      cursor += dt;
    }
  }

  if (p.retire_tail && latest_max_age > 0) {
    s.events.push_back(AdvanceEvent{latest_max_age + 120000});
  } else {
    s.events.push_back(AdvanceEvent{genrand::range(rng, 2000, 20000)});
  }
  return s;
}

inline Scenario generate_scenario(std::uint64_t seed) {
  return generate_scenario(profile_for_seed(seed));
}

}  // namespace fsd::harness
