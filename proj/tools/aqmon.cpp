// Command-line entry point tying the pipeline together: `simulate` runs the
// whole experiment on a virtual clock, `agent` samples and forwards for one
// station, `serve` hosts the ingestion endpoint, and `analyze` turns two
// recorded datasets into the correlation report.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "aqmon/clock.hpp"
#include "aqmon/config.hpp"
#include "aqmon/net.hpp"
#include "aqmon/pipeline.hpp"
#include "aqmon/server.hpp"
#include "aqmon/store.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitAnalysis = 4;

int exit_code_for(aqmon::ErrorCode code) {
  switch (code) {
    case aqmon::ErrorCode::config:
      return kExitConfig;
    case aqmon::ErrorCode::io:
    case aqmon::ErrorCode::parse:
    case aqmon::ErrorCode::data_integrity:
      return kExitIo;
    case aqmon::ErrorCode::precondition:
    case aqmon::ErrorCode::insufficient_data:
    case aqmon::ErrorCode::undefined_correlation:
    case aqmon::ErrorCode::degenerate_fit:
      return kExitAnalysis;
  }
  return 1;
}

std::atomic<bool> g_interrupted{false};

extern "C" void handle_signal(int) { g_interrupted = true; }

struct CommonFlags {
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mask;
};

void add_common(CLI::App& cmd, CommonFlags& flags) {
  cmd.add_option("--config", flags.config_path, "scenario configuration file");
  cmd.add_option("--out", flags.out_dir, "output directory (overrides config out_dir)");
  cmd.add_option("--seed", flags.seed, "RNG seed (overrides config rng_seed)");
  cmd.add_option("--mask", flags.mask,
                 "months to exclude, comma-separated YYYY-MM (overrides config mask)");
}

aqmon::Config load_with_overrides(const CommonFlags& flags) {
  aqmon::Config cfg;
  if (flags.config_path) {
    cfg = aqmon::load_config_file(*flags.config_path);
  } else {
    cfg.scenario = aqmon::default_scenario();
  }
  if (flags.seed) cfg.scenario.rng_seed = *flags.seed;
  if (flags.mask) cfg.scenario.mask = aqmon::MaskSpec::parse(*flags.mask);
  if (flags.out_dir) cfg.scenario.out_dir = *flags.out_dir;
  return cfg;
}

int cmd_simulate(const CommonFlags& flags) {
  const aqmon::Config cfg = load_with_overrides(flags);
  const auto result = aqmon::run_simulate(cfg.scenario);

  for (const auto& summary : {result.candidate, result.reference}) {
    for (const auto& ch : summary.channels) {
      std::cout << ch.station_id << "/" << aqmon::wire_token(ch.pollutant)
                << ": raw_samples=" << ch.raw_samples
                << " hourly_records=" << ch.hourly_records
                << " missing_hours=" << ch.missing_hours << "\n";
    }
  }
  for (const auto& series : result.series) {
    std::cout << "pairs " << aqmon::wire_token(series.pollutant) << ": " << series.n_pairs()
              << "\n";
  }
  std::cout << "store records: " << result.store_records << "\n";
  std::cout << "artifacts: " << result.out_dir.string() << "\n";
  return 0;
}

int cmd_agent(const CommonFlags& flags, const std::optional<std::string>& station_flag,
              const std::optional<std::string>& sink_flag, bool sim_clock,
              const std::optional<std::string>& raw_spool,
              const std::optional<std::string>& hourly_spool) {
  aqmon::Config cfg = load_with_overrides(flags);
  aqmon::ScenarioConfig& sc = cfg.scenario;

  const std::string station = station_flag.value_or(sc.candidate_station);
  aqmon::require(station == sc.candidate_station || station == sc.reference_station,
                 aqmon::ErrorCode::config,
                 "--station must name the configured candidate or reference station");
  const bool reference_side = station == sc.reference_station;

  std::optional<aqmon::Address> sink_addr = cfg.sink;
  if (sink_flag) sink_addr = aqmon::parse_address(*sink_flag);
  aqmon::require(sink_addr.has_value(), aqmon::ErrorCode::config,
                 "no sink address: pass --sink or set 'sink' in the config");

  aqmon::resolve_noise(sc);
  if (!sim_clock) {
    // Live run: the deployment span starts at the next full hour.
    aqmon::SystemClock probe;
    sc.start = aqmon::floor_hour(probe.now()) + std::chrono::hours{1};
    std::cout << "live clock: sampling " << sc.hours << " hours from "
              << aqmon::format_rfc3339(sc.start) << "\n";
  }

  aqmon::SocketSink sink(*sink_addr);
  aqmon::AgentSummary summary;
  const std::optional<std::filesystem::path> raw =
      raw_spool ? std::optional<std::filesystem::path>(*raw_spool) : std::nullopt;
  const std::optional<std::filesystem::path> hourly =
      hourly_spool ? std::optional<std::filesystem::path>(*hourly_spool) : std::nullopt;
  if (sim_clock) {
    aqmon::SimulatedClock clock(sc.start);
    summary = aqmon::run_station_agent(sc, reference_side, sink, clock, raw, hourly);
  } else {
    aqmon::SystemClock clock;
    summary = aqmon::run_station_agent(sc, reference_side, sink, clock, raw, hourly);
  }

  for (const auto& ch : summary.channels) {
    std::cout << ch.station_id << "/" << aqmon::wire_token(ch.pollutant)
              << ": raw_samples=" << ch.raw_samples << " hourly_records=" << ch.hourly_records
              << " missing_hours=" << ch.missing_hours << "\n";
  }
  std::cout << "produced=" << summary.produced << " sent=" << summary.sent
            << " remaining=" << summary.remaining << " dropped=" << summary.dropped
            << " sessions=" << summary.sessions << "\n";
  if (summary.produced > 0 && summary.sent == 0) {
    std::cerr << "error: nothing was delivered to " << sink_addr->host << ":"
              << sink_addr->port << " (last response: " << sink.last_response() << ")\n";
    return kExitIo;
  }
  return 0;
}

int cmd_serve(const CommonFlags& flags, const std::optional<std::string>& listen_flag,
              const std::optional<std::string>& data_dir_flag) {
  const aqmon::Config cfg = load_with_overrides(flags);

  std::optional<aqmon::Address> listen = cfg.listen;
  if (listen_flag) listen = aqmon::parse_address(*listen_flag);
  aqmon::require(listen.has_value(), aqmon::ErrorCode::config,
                 "no listen address: pass --listen or set 'listen' in the config");
  std::optional<std::filesystem::path> data_dir = cfg.data_dir;
  if (data_dir_flag) data_dir = *data_dir_flag;
  aqmon::require(data_dir.has_value(), aqmon::ErrorCode::config,
                 "no data directory: pass --data-dir or set 'data_dir' in the config");

  aqmon::Store store(*data_dir);
  if (store.discarded_partial_lines() > 0) {
    std::cerr << "recovered store: discarded " << store.discarded_partial_lines()
              << " torn trailing line(s)\n";
  }
  aqmon::IngestServer server(store, *listen);
  server.start();
  std::cout << "listening on " << listen->host << ":" << server.port() << "\n" << std::flush;
  std::cout << "data dir: " << data_dir->string() << " (" << store.size() << " records)\n"
            << std::flush;

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds{100});
  }
  server.stop();
  std::cout << "stopped; store holds " << store.size() << " records\n";
  return 0;
}

int cmd_analyze(const CommonFlags& flags, const std::string& candidate_path,
                const std::string& reference_path,
                const std::optional<std::string>& candidate_station,
                const std::optional<std::string>& reference_station,
                const std::optional<std::string>& pollutants_flag) {
  aqmon::AnalyzeRequest request;
  request.candidate_path = candidate_path;
  request.reference_path = reference_path;
  request.candidate_station = candidate_station;
  request.reference_station = reference_station;

  // Flags win; a config supplies mask/out when given; otherwise: no mask.
  if (flags.config_path) {
    const aqmon::Config cfg = aqmon::load_config_file(*flags.config_path);
    request.mask = cfg.scenario.mask;
    request.out_dir = cfg.scenario.out_dir;
  } else {
    request.out_dir = "out";
  }
  if (flags.mask) request.mask = aqmon::MaskSpec::parse(*flags.mask);
  if (flags.out_dir) request.out_dir = *flags.out_dir;

  if (pollutants_flag) {
    for (std::size_t pos = 0; pos <= pollutants_flag->size();) {
      const std::size_t comma = pollutants_flag->find(',', pos);
      const std::string token = comma == std::string::npos
                                    ? pollutants_flag->substr(pos)
                                    : pollutants_flag->substr(pos, comma - pos);
      const auto p = aqmon::try_parse_pollutant(token);
      aqmon::require(p.has_value(), aqmon::ErrorCode::config,
                     "unknown pollutant '" + token + "' in --pollutants");
      request.pollutants.push_back(*p);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }

  const auto result = aqmon::run_analyze(request);
  std::cout << aqmon::render_report_text(result.report);
  std::cout << "artifacts: " << result.out_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co-located air-quality sensor pipeline: simulate, collect, ingest, analyze"};
  app.require_subcommand(1);

  CommonFlags simulate_flags;
  auto* simulate = app.add_subcommand(
      "simulate", "run the full experiment on a simulated clock and write the report");
  add_common(*simulate, simulate_flags);

  CommonFlags agent_flags;
  std::optional<std::string> agent_station;
  std::optional<std::string> agent_sink;
  std::optional<std::string> agent_raw_spool;
  std::optional<std::string> agent_hourly_spool;
  bool agent_sim_clock = false;
  auto* agent =
      app.add_subcommand("agent", "sample one station's sensors and forward hourly records");
  add_common(*agent, agent_flags);
  agent->add_option("--station", agent_station,
                    "station to run (candidate or reference; default candidate)");
  agent->add_option("--sink", agent_sink, "ingestion address host:port (overrides config)");
  agent->add_flag("--sim-clock", agent_sim_clock,
                  "drive the deployment span on a virtual clock (runs instantly)");
  agent->add_option("--raw-spool", agent_raw_spool, "append raw samples to this CSV");
  agent->add_option("--hourly-spool", agent_hourly_spool, "append hourly records to this CSV");

  CommonFlags serve_flags;
  std::optional<std::string> serve_listen;
  std::optional<std::string> serve_data_dir;
  auto* serve = app.add_subcommand("serve", "host the ingestion service until interrupted");
  add_common(*serve, serve_flags);
  serve->add_option("--listen", serve_listen, "listen address host:port (port 0 picks one)");
  serve->add_option("--data-dir", serve_data_dir, "store directory (overrides config)");

  CommonFlags analyze_flags;
  std::string analyze_candidate;
  std::string analyze_reference;
  std::optional<std::string> analyze_candidate_station;
  std::optional<std::string> analyze_reference_station;
  std::optional<std::string> analyze_pollutants;
  auto* analyze =
      app.add_subcommand("analyze", "correlate two recorded datasets and write the report");
  add_common(*analyze, analyze_flags);
  analyze->add_option("--candidate", analyze_candidate, "candidate store directory or hourly CSV")
      ->required();
  analyze->add_option("--reference", analyze_reference, "reference store directory or hourly CSV")
      ->required();
  analyze->add_option("--candidate-station", analyze_candidate_station,
                      "station id to read from the candidate input");
  analyze->add_option("--reference-station", analyze_reference_station,
                      "station id to read from the reference input");
  analyze->add_option("--pollutants", analyze_pollutants,
                      "comma-separated pollutant tokens (default: all present on both sides)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(simulate_flags);
    if (agent->parsed()) {
      return cmd_agent(agent_flags, agent_station, agent_sink, agent_sim_clock, agent_raw_spool,
                       agent_hourly_spool);
    }
    if (serve->parsed()) return cmd_serve(serve_flags, serve_listen, serve_data_dir);
    if (analyze->parsed()) {
      return cmd_analyze(analyze_flags, analyze_candidate, analyze_reference,
                         analyze_candidate_station, analyze_reference_station,
                         analyze_pollutants);
    }
  } catch (const aqmon::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
