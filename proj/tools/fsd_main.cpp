// Command-line harness: deterministic scenario replay, randomized oracle
// equivalence checks, and wall-clock benchmark runs.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsd/fsd.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    std::exit(2);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fsd::harness::HarnessConfig load_config(const std::string& path) {
  if (path.empty()) return fsd::harness::HarnessConfig{};
  return fsd::harness::parse_config(read_file(path));
}

void write_metrics(const std::vector<fsd::harness::Metric>& metrics,
                   const std::string& format, std::ostream& out) {
  if (format == "jsonl")
    out << fsd::harness::metrics_jsonl(metrics);
  else
    out << fsd::harness::metrics_csv(metrics);
}

std::vector<fsd::harness::Metric> report_metrics(
    const fsd::harness::RunReport& report) {
  using fsd::harness::Metric;
  std::vector<Metric> m;
  const auto& c = report.conservation;
  m.push_back({"submitted", static_cast<double>(c.submitted), "count"});
  m.push_back({"derived", static_cast<double>(c.derived), "count"});
  m.push_back({"emitted", static_cast<double>(c.emitted()), "count"});
  m.push_back({"dropped", static_cast<double>(c.dropped), "count"});
  m.push_back({"dead_lettered", static_cast<double>(c.dead_lettered),
               "count"});
  m.push_back({"retired", static_cast<double>(c.retired), "count"});
  m.push_back({"still_dehydrated", static_cast<double>(c.still_dehydrated),
               "count"});
  m.push_back({"conserved", c.conserved() ? 1.0 : 0.0, "bool"});
  m.push_back({"decisions", static_cast<double>(report.decisions), "count"});
  m.push_back({"log_events", static_cast<double>(report.log.size()),
               "count"});
  m.push_back({"end_time", static_cast<double>(report.end_ms), "ms"});
  for (const auto& [stage, count] : report.processed)
    m.push_back({"processed." + stage, static_cast<double>(count), "count"});
  std::vector<double> lat(report.latencies_ms.begin(),
                          report.latencies_ms.end());
  m.push_back({"decision_latency_p50", fsd::harness::percentile(lat, 50.0),
               "ms"});
  m.push_back({"decision_latency_p99", fsd::harness::percentile(lat, 99.0),
               "ms"});
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"filter/split/dehydrate geo-matching harness"};
  app.require_subcommand(1);

  std::string metrics_format = "csv";
  app.add_option("--metrics-format", metrics_format,
                 "metrics output format: csv or jsonl")
      ->check(CLI::IsMember({"csv", "jsonl"}));

  auto* replay_cmd =
      app.add_subcommand("replay", "replay a scenario deterministically");
  std::string replay_scenario;
  std::string replay_config;
  std::string replay_out;
  replay_cmd->add_option("scenario", replay_scenario, "scenario file")
      ->required();
  replay_cmd->add_option("--config", replay_config, "config file");
  replay_cmd->add_option("--out", replay_out,
                         "write the action log here instead of stdout");

  auto* bench_cmd = app.add_subcommand("bench", "wall-clock throughput run");
  std::string bench_config;
  double bench_seconds = 5.0;
  std::uint64_t bench_seed = 1;
  std::size_t bench_candidates = 10000;
  bench_cmd->add_option("--config", bench_config, "config file");
  bench_cmd->add_option("--seconds", bench_seconds, "run duration");
  bench_cmd->add_option("--seed", bench_seed, "generator seed");
  bench_cmd->add_option("--candidates", bench_candidates,
                        "indexed candidate population");

  auto* gen_cmd =
      app.add_subcommand("gen", "write a generated scenario to a file");
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen_cmd->add_option("--seed", gen_seed, "generator seed")->required();
  gen_cmd->add_option("--out", gen_out,
                      "output file (stdout when omitted)");

  auto* oracle_cmd = app.add_subcommand(
      "oracle", "compare the pipeline against the brute-force model");
  std::string oracle_scenario;
  std::string oracle_config;
  std::optional<std::uint64_t> oracle_seed;
  oracle_cmd->add_option("scenario", oracle_scenario,
                         "scenario file (omit when using --seed)");
  oracle_cmd->add_option("--seed", oracle_seed,
                         "generate the scenario from this seed");
  oracle_cmd->add_option("--config", oracle_config, "config file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (replay_cmd->parsed()) {
      const auto cfg = load_config(replay_config);
      const auto scenario =
          fsd::harness::parse_scenario(read_file(replay_scenario));
      const auto report = fsd::harness::replay(scenario, cfg);
      const std::string log = fsd::harness::format_action_log(report.log);
      if (replay_out.empty()) {
        std::cout << log;
      } else {
        std::ofstream out(replay_out, std::ios::binary);
        if (!out) {
          std::cerr << "error: cannot write " << replay_out << "\n";
          return 2;
        }
        out << log;
      }
      write_metrics(report_metrics(report), metrics_format, std::cerr);
      return report.conservation.conserved() ? 0 : 1;
    }

    if (bench_cmd->parsed()) {
      const auto cfg = load_config(bench_config);
      const auto report = fsd::harness::bench(cfg, bench_seconds, bench_seed,
                                              bench_candidates);
      std::vector<fsd::harness::Metric> m;
      m.push_back({"operations", static_cast<double>(report.operations),
                   "count"});
      m.push_back({"questions_submitted",
                   static_cast<double>(report.questions_submitted), "count"});
      m.push_back({"indexed_candidates",
                   static_cast<double>(report.indexed_candidates), "count"});
      m.push_back({"wall_time", report.wall_seconds, "s"});
      m.push_back({"throughput", report.ops_per_sec, "ops/s"});
      m.push_back({"latency_p50", report.p50_us, "us"});
      m.push_back({"latency_p99", report.p99_us, "us"});
      m.push_back({"log_events", static_cast<double>(report.log_events),
                   "count"});
      write_metrics(m, metrics_format, std::cout);
      return 0;
    }

    if (gen_cmd->parsed()) {
      const std::string text = fsd::harness::format_scenario(
          fsd::harness::generate_scenario(gen_seed));
      if (gen_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(gen_out, std::ios::binary);
        if (!out) {
          std::cerr << "error: cannot write " << gen_out << "\n";
          return 2;
        }
        out << text;
      }
      return 0;
    }

    if (oracle_cmd->parsed()) {
      if (oracle_scenario.empty() == !oracle_seed.has_value()) {
        std::cerr << "error: pass exactly one of a scenario file or --seed\n";
        return 2;
      }
      const auto cfg = load_config(oracle_config);
      const fsd::harness::Scenario scenario =
          oracle_seed ? fsd::harness::generate_scenario(*oracle_seed)
                      : fsd::harness::parse_scenario(
                            read_file(oracle_scenario));
      const auto diff = fsd::harness::oracle_check(scenario, cfg);
      if (diff.pass) {
        std::cout << "PASS (" << diff.pipeline_lines << " log lines)\n";
        return 0;
      }
      std::cout << "FAIL: " << diff.divergence << "\n";
      return 1;
    }
  } catch (const fsd::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 2;
}
