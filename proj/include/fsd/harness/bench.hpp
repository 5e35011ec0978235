#pragma once

#include <chrono>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fsd/clock.hpp"
#include "fsd/geomatch.hpp"
#include "fsd/harness/config.hpp"
#include "fsd/harness/metrics.hpp"
#include "fsd/harness/reference_pipeline.hpp"
#include "fsd/harness/scenario_gen.hpp"

namespace fsd::harness {

struct BenchReport {
  std::uint64_t operations = 0;  // match + decide invocations
  std::uint64_t questions_submitted = 0;
  std::size_t indexed_candidates = 0;
  double wall_seconds = 0.0;
  double ops_per_sec = 0.0;
  double p50_us = 0.0;
  double p99_us = 0.0;
  std::uint64_t log_events = 0;
};

/// Wall-clock throughput run: preloads a candidate population, then feeds
/// random questions as fast as the single pumping thread will take them.
/// An operation is one match_question + business_decide; rehydrations
/// triggered along the way count too, since the pump performs them inline.
/// Per-question latency is measured around submit + pump.
inline BenchReport bench(const HarnessConfig& cfg, double seconds,
                         std::uint64_t seed, std::size_t candidates = 10000) {
  geomatch::GeoMatchConfig match_cfg = cfg.match;
  // Short lifetimes and an early first wake keep the parked population
  // bounded while still exercising the rehydration path under load.
  match_cfg.dehydration.base_interval_ms = 500;
  match_cfg.dehydration.max_age_ms = 3000;

  Clock clock(ClockMode::WallClock);
  ReferencePipeline pipeline(match_cfg, clock);
  Engine<GeoPayload>& engine = pipeline.engine();

  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 0xda3e39cb94b95bdbull);
  const double center_lat = 40.0;
  const double center_lon = -74.0;
  const double scatter_m = 30000.0;

  for (std::size_t i = 0; i < candidates; ++i) {
    double lat = center_lat, lon = center_lon;
    detail::offset_coord(lat, lon,
                         genrand::real(rng, -scatter_m, scatter_m),
                         genrand::real(rng, -scatter_m, scatter_m));
    pipeline.submit_candidate(geomatch::CandidateLocation{
        "c" + std::to_string(i + 1), genrand::snap(lat),
        genrand::snap(detail::clamp_lon(lon)), clock.now_ms()});
  }
  engine.pump();

  using steady = std::chrono::steady_clock;
  std::vector<double> latencies_us;
  latencies_us.reserve(1 << 20);

  const auto start = steady::now();
  const auto deadline =
      start + std::chrono::duration_cast<steady::duration>(
                  std::chrono::duration<double>(seconds));
  std::uint64_t submitted = 0;
  while (steady::now() < deadline) {
    geomatch::Question q;
    q.question_id = "bq" + std::to_string(++submitted);
    double lat = center_lat, lon = center_lon;
    detail::offset_coord(lat, lon,
                         genrand::real(rng, -scatter_m, scatter_m),
                         genrand::real(rng, -scatter_m, scatter_m));
    q.lat_deg = genrand::snap(lat);
    q.lon_deg = genrand::snap(detail::clamp_lon(lon));
    q.radius_m = genrand::real(rng, 300.0, 5000.0);
    q.created_ms = clock.now_ms();
    q.max_age_ms = match_cfg.dehydration.max_age_ms;

    const auto op_start = steady::now();
    pipeline.submit_question(q);
    engine.pump();
    const auto op_end = steady::now();
    latencies_us.push_back(
        std::chrono::duration<double, std::micro>(op_end - op_start).count());
  }
  const double wall =
      std::chrono::duration<double>(steady::now() - start).count();

  BenchReport report;
  report.operations = pipeline.state().decisions;
  report.questions_submitted = submitted;
  report.indexed_candidates = pipeline.state().candidates.size();
  report.wall_seconds = wall;
  report.ops_per_sec =
      wall > 0.0 ? static_cast<double>(report.operations) / wall : 0.0;
  report.p50_us = percentile(latencies_us, 50.0);
  report.p99_us = percentile(latencies_us, 99.0);
  report.log_events = pipeline.state().log.size();
  return report;
}

}  // namespace fsd::harness
