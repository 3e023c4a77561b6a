#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aqmon/agent.hpp"
#include "aqmon/align.hpp"
#include "aqmon/config.hpp"
#include "aqmon/csv.hpp"
#include "aqmon/report.hpp"
#include "aqmon/stats.hpp"
#include "aqmon/store.hpp"

namespace aqmon {

/// Sample standard deviation of the deterministic hourly truth means over the
/// unmasked hours of the span — the signal strength the noise derivation
/// works against. The reference instrument (noiseless, by requirement)
/// reports exactly these means, so this sigma is the one Pearson sees.
inline double truth_signal_sigma(const TruthSignalParams& truth, const SamplingSchedule& schedule,
                                 UtcSeconds start, int hours, const MaskSpec& mask) {
  validate(schedule);
  require(is_hour_aligned(start), ErrorCode::precondition, "start must be hour-aligned");
  require(hours >= 1, ErrorCode::precondition, "span must cover at least one hour");
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(hours));
  for (int h = 0; h < hours; ++h) {
    const UtcSeconds hour = start + std::chrono::hours{h};
    if (mask.contains(hour)) continue;
    double sum = 0.0;
    for (const auto offset : schedule.offsets) sum += truth_at(truth, hour + offset);
    means.push_back(sum / static_cast<double>(schedule.offsets.size()));
  }
  require(means.size() >= 2, ErrorCode::config,
          "too few unmasked hours to characterise the truth signal");
  double mean = 0.0;
  for (const double m : means) mean += m;
  mean /= static_cast<double>(means.size());
  double ss = 0.0;
  for (const double m : means) ss += (m - mean) * (m - mean);
  return std::sqrt(ss / static_cast<double>(means.size() - 1));
}

/// Per-sample noise sigma that makes the candidate/reference hourly-mean
/// correlation land on `target`. With hourly-mean noise e and signal s,
/// rho = sigma_s / sqrt(sigma_s^2 + sigma_e^2), so sigma_e =
/// sigma_s * sqrt(1/rho^2 - 1); averaging k samples per hour shrinks
/// per-sample noise by sqrt(k), hence sigma_n = sigma_e * sqrt(k).
inline double derive_noise_sigma(double target_pearson, double signal_sigma,
                                 int samples_per_hour) {
  require(target_pearson > 0.0 && target_pearson <= 1.0, ErrorCode::precondition,
          "target correlation must be in (0, 1]");
  require(signal_sigma >= 0.0, ErrorCode::precondition, "signal sigma must be >= 0");
  require(samples_per_hour >= 1, ErrorCode::precondition, "samples_per_hour must be >= 1");
  if (target_pearson == 1.0) return 0.0;
  require(signal_sigma > 0.0, ErrorCode::config,
          "cannot target a correlation below 1 with a flat truth signal");
  const double hourly_sigma =
      signal_sigma * std::sqrt(1.0 / (target_pearson * target_pearson) - 1.0);
  return hourly_sigma * std::sqrt(static_cast<double>(samples_per_hour));
}

/// How one channel's candidate noise was settled.
struct NoiseResolution {
  PollutantKind pollutant{};
  double noise_sigma_per_sample = 0.0;
  std::optional<double> target_pearson;  // set when derived from a target
  std::optional<double> signal_sigma;
};

/// Replaces every target_pearson with a concrete per-sample noise sigma.
/// Must run before the agents, and runs identically in every pipeline path,
/// which is what keeps `simulate` and the agent/serve/analyze composition
/// byte-for-byte interchangeable. Deriving requires a clean comparison: a
/// noiseless, drift-free reference and a drift-free candidate.
inline std::vector<NoiseResolution> resolve_noise(ScenarioConfig& sc) {
  std::vector<NoiseResolution> out;
  out.reserve(sc.channels.size());
  for (auto& ch : sc.channels) {
    NoiseResolution res;
    res.pollutant = ch.pollutant;
    if (ch.target_pearson) {
      const std::string token(wire_token(ch.pollutant));
      require(ch.reference_sensor.noise_sigma_ugm3 == 0.0, ErrorCode::config,
              token + ": target_pearson requires a noiseless reference sensor");
      require(ch.reference_sensor.drift_ugm3_per_day == 0.0 &&
                  ch.candidate_sensor.drift_ugm3_per_day == 0.0,
              ErrorCode::config, token + ": target_pearson requires drift-free sensors");
      const double sigma_s =
          truth_signal_sigma(ch.truth, sc.schedule, sc.start, sc.hours, sc.mask);
      ch.candidate_sensor.noise_sigma_ugm3 =
          derive_noise_sigma(*ch.target_pearson, sigma_s, sc.schedule.samples_per_hour());
      res.target_pearson = ch.target_pearson;
      res.signal_sigma = sigma_s;
      ch.target_pearson.reset();
    }
    res.noise_sigma_per_sample = ch.candidate_sensor.noise_sigma_ugm3;
    out.push_back(res);
  }
  return out;
}

/// Runs one station's agent over the scenario span: synthetic sensors for
/// every configured pollutant, seeds derived from (rng_seed, station,
/// pollutant) so the two stations draw independent noise. Scenario targets
/// must already be resolved.
inline AgentSummary run_station_agent(const ScenarioConfig& sc, bool reference_side,
                                      RecordSink& sink, Clock& clock,
                                      const std::optional<std::filesystem::path>& raw_spool,
                                      const std::optional<std::filesystem::path>& hourly_spool) {
  require(!sc.channels.empty(), ErrorCode::precondition, "scenario has no channels");
  const std::string& station = reference_side ? sc.reference_station : sc.candidate_station;
  std::vector<std::unique_ptr<SyntheticSensor>> sensors;
  std::vector<AgentChannelSpec> specs;
  for (const auto& ch : sc.channels) {
    require(!ch.target_pearson, ErrorCode::precondition,
            "unresolved target_pearson: call resolve_noise first");
    SensorModel model = reference_side ? ch.reference_sensor : ch.candidate_sensor;
    model.rng_seed = derive_seed(sc.rng_seed, station, ch.pollutant);
    sensors.push_back(
        std::make_unique<SyntheticSensor>(station, ch.pollutant, ch.truth, model, sc.start));
    specs.push_back({station, ch.pollutant, sensors.back().get()});
  }
  AgentOptions options;
  options.schedule = sc.schedule;
  options.policy = sc.policy;
  options.min_samples_per_hour = sc.min_samples_per_hour;
  options.buffer_capacity = sc.buffer_capacity;
  options.raw_spool = raw_spool;
  options.hourly_spool = hourly_spool;
  return run_agent(specs, sink, clock, sc.start, sc.hours, options);
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  require(out.good(), ErrorCode::io, "cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  require(out.good(), ErrorCode::io, "write failed for '" + path.string() + "'");
}

inline std::string format_sigma(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string render_monthly_rows(const std::vector<MonthlySummaryRow>& rows) {
  std::string text;
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "  %s mean=%.2f max=%.2f n_hours=%u\n",
                  format_year_month(row.month).c_str(), row.mean_ugm3, row.max_ugm3, row.n_hours);
    text += buf;
  }
  return text;
}

inline std::string render_agent_summary(const std::string& station, const AgentSummary& s) {
  std::string text;
  char buf[256];
  for (const auto& ch : s.channels) {
    std::snprintf(buf, sizeof buf,
                  "channel %s/%s: raw_samples=%llu hourly_records=%llu missing_hours=%llu "
                  "dropped=%llu%s\n",
                  ch.station_id.c_str(), std::string(wire_token(ch.pollutant)).c_str(),
                  static_cast<unsigned long long>(ch.raw_samples),
                  static_cast<unsigned long long>(ch.hourly_records),
                  static_cast<unsigned long long>(ch.missing_hours),
                  static_cast<unsigned long long>(ch.dropped_records),
                  ch.exhausted ? " exhausted" : "");
    text += buf;
  }
  std::snprintf(buf, sizeof buf,
                "station %s: produced=%llu sent=%llu remaining=%llu dropped=%llu sessions=%llu "
                "max_session_records=%zu longest_session_ms=%lld\n",
                station.c_str(), static_cast<unsigned long long>(s.produced),
                static_cast<unsigned long long>(s.sent),
                static_cast<unsigned long long>(s.remaining),
                static_cast<unsigned long long>(s.dropped),
                static_cast<unsigned long long>(s.sessions), s.max_session_records,
                static_cast<long long>(s.longest_session.count()));
  text += buf;
  return text;
}

}  // namespace detail

/// Writes the analysis artifacts (report.txt, report.json, one
/// pairs_<pollutant>.csv per channel) and returns the paths written.
inline std::vector<std::filesystem::path> write_report_artifacts(
    const std::filesystem::path& out_dir, const CorrelationReport& report,
    std::span<const AlignedSeries> series) {
  std::vector<std::filesystem::path> written;
  const auto text_path = out_dir / "report.txt";
  detail::write_text_file(text_path, render_report_text(report));
  written.push_back(text_path);
  const auto json_path = out_dir / "report.json";
  detail::write_text_file(json_path, report_to_json(report).dump(2) + "\n");
  written.push_back(json_path);
  for (const auto& s : series) {
    const auto pairs_path =
        out_dir / ("pairs_" + std::string(wire_token(s.pollutant)) + ".csv");
    write_pairs_csv(pairs_path, s);
    written.push_back(pairs_path);
  }
  return written;
}

struct SimulateResult {
  std::filesystem::path out_dir;
  AgentSummary candidate;
  AgentSummary reference;
  CorrelationReport report;
  std::vector<AlignedSeries> series;
  std::vector<NoiseResolution> noise;
  std::size_t store_records = 0;
};

/// The whole experiment in one call: resolve noise, run both stations'
/// agents on simulated clocks into a local store, analyze, and write every
/// artifact under the scenario's out_dir. Reruns first clear the artifacts a
/// previous run left, so identical (config, seed) inputs give byte-identical
/// outputs. On failure, everything this run created is removed again.
inline SimulateResult run_simulate(ScenarioConfig sc) {
  require(!sc.channels.empty(), ErrorCode::config, "scenario has no channels");

  SimulateResult result;
  result.noise = resolve_noise(sc);
  result.out_dir = sc.out_dir;

  const bool out_existed = std::filesystem::exists(sc.out_dir);
  {
    std::error_code ec;
    std::filesystem::create_directories(sc.out_dir, ec);
    require(!ec && std::filesystem::is_directory(sc.out_dir), ErrorCode::io,
            "cannot create output directory '" + sc.out_dir.string() + "'");
  }

  const auto data_dir = sc.out_dir / "data";
  const auto candidate_raw = sc.out_dir / ("raw_" + sc.candidate_station + ".csv");
  const auto reference_raw = sc.out_dir / ("raw_" + sc.reference_station + ".csv");
  const auto candidate_hourly = sc.out_dir / ("hourly_" + sc.candidate_station + ".csv");
  const auto reference_hourly = sc.out_dir / ("hourly_" + sc.reference_station + ".csv");
  std::vector<std::filesystem::path> owned = {
      data_dir,          candidate_raw,           reference_raw,
      candidate_hourly,  reference_hourly,        sc.out_dir / "report.txt",
      sc.out_dir / "report.json", sc.out_dir / "summary.txt",
  };
  for (const auto& ch : sc.channels) {
    owned.push_back(sc.out_dir / ("pairs_" + std::string(wire_token(ch.pollutant)) + ".csv"));
  }

  const auto remove_owned = [&] {
    std::error_code ec;
    for (const auto& p : owned) std::filesystem::remove_all(p, ec);
    if (!out_existed) std::filesystem::remove(sc.out_dir, ec);
  };

  try {
    // Fresh slate: stale artifacts from a previous run must not leak into
    // this one (appending into an existing store would turn every ingest
    // into a duplicate and double the spools).
    {
      std::error_code ec;
      for (const auto& p : owned) std::filesystem::remove_all(p, ec);
    }

    Store store(data_dir);
    StoreSink sink(store);

    SimulatedClock candidate_clock(sc.start);
    result.candidate =
        run_station_agent(sc, false, sink, candidate_clock, candidate_raw, candidate_hourly);
    SimulatedClock reference_clock(sc.start);
    result.reference =
        run_station_agent(sc, true, sink, reference_clock, reference_raw, reference_hourly);

    for (const auto& ch : sc.channels) {
      const auto candidate_records = store.channel_records(sc.candidate_station, ch.pollutant);
      const auto reference_records = store.channel_records(sc.reference_station, ch.pollutant);
      result.series.push_back(
          align(ch.pollutant, candidate_records, reference_records, sc.mask));
    }
    result.report = build_report(result.series, sc.mask);
    write_report_artifacts(sc.out_dir, result.report, result.series);

    std::string summary;
    summary += "start=" + format_rfc3339(sc.start) + " hours=" + std::to_string(sc.hours) +
               " seed=" + std::to_string(sc.rng_seed) + "\n";
    summary += "candidate=" + sc.candidate_station + " reference=" + sc.reference_station + "\n";
    summary += "mask=";
    if (sc.mask.empty()) {
      summary += "none";
    } else {
      for (std::size_t i = 0; i < sc.mask.months.size(); ++i) {
        if (i > 0) summary += ',';
        summary += format_year_month(sc.mask.months[i]);
      }
    }
    summary += "\n\n";
    summary += detail::render_agent_summary(sc.candidate_station, result.candidate);
    summary += detail::render_agent_summary(sc.reference_station, result.reference);
    summary += "\n";
    for (const auto& res : result.noise) {
      summary += "noise " + std::string(wire_token(res.pollutant)) +
                 ": sigma_per_sample=" + detail::format_sigma(res.noise_sigma_per_sample);
      if (res.target_pearson) {
        summary += " (derived: target_pearson=" + detail::format_sigma(*res.target_pearson) +
                   " signal_sigma=" + detail::format_sigma(*res.signal_sigma) + ")";
      }
      summary += "\n";
    }
    summary += "\n";
    for (const auto& s : result.series) {
      summary += "pairs " + std::string(wire_token(s.pollutant)) + ": " +
                 std::to_string(s.n_pairs()) + "\n";
    }
    for (const auto& station : {sc.candidate_station, sc.reference_station}) {
      for (const auto& ch : sc.channels) {
        const auto rows = monthly_summary(store.channel_records(station, ch.pollutant));
        summary += "monthly " + station + "/" + std::string(wire_token(ch.pollutant)) + ":\n";
        summary += detail::render_monthly_rows(rows);
      }
    }
    detail::write_text_file(sc.out_dir / "summary.txt", summary);

    result.store_records = store.size();
  } catch (...) {
    remove_owned();
    throw;
  }
  return result;
}

struct AnalyzeRequest {
  std::filesystem::path candidate_path;  // store directory or hourly CSV file
  std::filesystem::path reference_path;
  std::optional<std::string> candidate_station;
  std::optional<std::string> reference_station;
  std::vector<PollutantKind> pollutants;  // empty: every pollutant present on both sides
  MaskSpec mask;
  std::filesystem::path out_dir;
};

struct AnalyzeResult {
  std::filesystem::path out_dir;
  std::string candidate_station;
  std::string reference_station;
  CorrelationReport report;
  std::vector<AlignedSeries> series;
  std::vector<std::pair<std::string, std::vector<MonthlySummaryRow>>> monthly;  // per channel
};

namespace detail {

/// Loads every hourly record from a store directory or an hourly CSV export.
inline std::vector<HourlyRecord> load_hourly_records(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), ErrorCode::io,
          "input path '" + path.string() + "' does not exist");
  if (std::filesystem::is_directory(path)) {
    Store store(path);
    std::vector<HourlyRecord> out;
    for (const auto& station : store.stations()) {
      for (const auto pollutant : store.pollutants(station)) {
        auto records = store.channel_records(station, pollutant);
        out.insert(out.end(), records.begin(), records.end());
      }
    }
    return out;
  }
  return read_hourly_csv(path);
}

inline std::string pick_station(const std::vector<HourlyRecord>& records,
                                const std::optional<std::string>& requested,
                                const std::string& label) {
  std::set<std::string> present;
  for (const auto& rec : records) present.insert(rec.station_id);
  if (requested) {
    require(present.contains(*requested), ErrorCode::config,
            label + " input has no records for station '" + *requested + "'");
    return *requested;
  }
  require(!present.empty(), ErrorCode::insufficient_data, label + " input holds no records");
  require(present.size() == 1, ErrorCode::config,
          label + " input holds several stations; pick one explicitly");
  return *present.begin();
}

inline std::vector<HourlyRecord> channel_slice(const std::vector<HourlyRecord>& records,
                                               const std::string& station,
                                               PollutantKind pollutant) {
  std::vector<HourlyRecord> out;
  for (const auto& rec : records) {
    if (rec.station_id == station && rec.pollutant == pollutant) out.push_back(rec);
  }
  std::stable_sort(out.begin(), out.end(), [](const HourlyRecord& a, const HourlyRecord& b) {
    return a.bucket_start < b.bucket_start;
  });
  return out;
}

}  // namespace detail

/// Pairs two recorded datasets and writes the analysis artifacts. Inputs may
/// be store directories or hourly CSV exports, mixed freely.
inline AnalyzeResult run_analyze(const AnalyzeRequest& request) {
  validate(request.mask);
  const auto candidate_records = detail::load_hourly_records(request.candidate_path);
  const auto reference_records = detail::load_hourly_records(request.reference_path);

  AnalyzeResult result;
  result.out_dir = request.out_dir;
  result.candidate_station =
      detail::pick_station(candidate_records, request.candidate_station, "candidate");
  result.reference_station =
      detail::pick_station(reference_records, request.reference_station, "reference");

  std::vector<PollutantKind> pollutants = request.pollutants;
  if (pollutants.empty()) {
    for (const auto pollutant : kAllPollutants) {
      const auto on_candidate =
          detail::channel_slice(candidate_records, result.candidate_station, pollutant);
      const auto on_reference =
          detail::channel_slice(reference_records, result.reference_station, pollutant);
      if (!on_candidate.empty() && !on_reference.empty()) pollutants.push_back(pollutant);
    }
    require(!pollutants.empty(), ErrorCode::insufficient_data,
            "no pollutant has records on both sides");
  }

  for (const auto pollutant : pollutants) {
    const auto candidate =
        detail::channel_slice(candidate_records, result.candidate_station, pollutant);
    const auto reference =
        detail::channel_slice(reference_records, result.reference_station, pollutant);
    result.series.push_back(align(pollutant, candidate, reference, request.mask));
    result.monthly.emplace_back(
        result.candidate_station + "/" + std::string(wire_token(pollutant)),
        monthly_summary(candidate));
    result.monthly.emplace_back(
        result.reference_station + "/" + std::string(wire_token(pollutant)),
        monthly_summary(reference));
  }
  result.report = build_report(result.series, request.mask);

  {
    std::error_code ec;
    std::filesystem::create_directories(request.out_dir, ec);
    require(!ec && std::filesystem::is_directory(request.out_dir), ErrorCode::io,
            "cannot create output directory '" + request.out_dir.string() + "'");
  }
  write_report_artifacts(request.out_dir, result.report, result.series);

  std::string summary;
  summary += "candidate=" + result.candidate_station + " (" +
             request.candidate_path.string() + ")\n";
  summary += "reference=" + result.reference_station + " (" +
             request.reference_path.string() + ")\n";
  for (const auto& s : result.series) {
    summary += "pairs " + std::string(wire_token(s.pollutant)) + ": " +
               std::to_string(s.n_pairs()) + "\n";
  }
  for (const auto& [channel, rows] : result.monthly) {
    summary += "monthly " + channel + ":\n" + detail::render_monthly_rows(rows);
  }
  detail::write_text_file(request.out_dir / "summary.txt", summary);
  return result;
}

}  // namespace aqmon
