#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "aqmon/align.hpp"
#include "aqmon/connectivity.hpp"
#include "aqmon/net.hpp"
#include "aqmon/schedule.hpp"
#include "aqmon/sensor.hpp"
#include "aqmon/truth.hpp"

namespace aqmon {

/// Flat `key = value` configuration document: one assignment per line, `#`
/// comments, optional double quotes around values, dotted keys for grouping
/// (e.g. `channel.no2.baseline`). Every key read is marked consumed;
/// `finish()` then rejects leftovers, which is what catches misspelled keys.
class FlatConfig {
 public:
  static FlatConfig parse_string(std::string_view text, std::string name) {
    FlatConfig cfg;
    cfg.name_ = std::move(name);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t nl = text.find('\n', pos);
      std::string_view line =
          nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
      ++line_no;
      cfg.parse_line(line, line_no);
      if (nl == std::string_view::npos) break;
      pos = nl + 1;
    }
    return cfg;
  }

  static FlatConfig parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot open config '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path.string());
  }

  bool has(const std::string& key) const { return entries_.contains(key); }

  /// Raw value, marking the key consumed; std::nullopt when absent.
  std::optional<std::string> take(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    it->second.consumed = true;
    return it->second.value;
  }

  std::string take_string(const std::string& key, std::string_view fallback) {
    const auto v = take(key);
    return v ? *v : std::string(fallback);
  }

  std::int64_t take_int(const std::string& key, std::int64_t fallback) {
    const auto v = take(key);
    if (!v) return fallback;
    std::int64_t out{};
    const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
    require(res.ec == std::errc{} && res.ptr == v->data() + v->size(), ErrorCode::config,
            describe(key) + ": expected an integer, got '" + *v + "'");
    return out;
  }

  std::uint64_t take_u64(const std::string& key, std::uint64_t fallback) {
    const auto v = take(key);
    if (!v) return fallback;
    std::uint64_t out{};
    const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
    require(res.ec == std::errc{} && res.ptr == v->data() + v->size(), ErrorCode::config,
            describe(key) + ": expected an unsigned integer, got '" + *v + "'");
    return out;
  }

  double take_double(const std::string& key, double fallback) {
    const auto v = take(key);
    if (!v) return fallback;
    double out{};
    const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
    require(res.ec == std::errc{} && res.ptr == v->data() + v->size() && std::isfinite(out),
            ErrorCode::config, describe(key) + ": expected a finite number, got '" + *v + "'");
    return out;
  }

  UtcSeconds take_instant(const std::string& key, UtcSeconds fallback) {
    const auto v = take(key);
    if (!v) return fallback;
    const auto t = try_parse_rfc3339(*v);
    require(t.has_value(), ErrorCode::config,
            describe(key) + ": expected an RFC 3339 UTC instant, got '" + *v + "'");
    return *t;
  }

  /// Keys below a dotted prefix, e.g. prefix "channel." -> "channel.no2.bias".
  std::vector<std::string> keys_with_prefix(std::string_view prefix) const {
    std::vector<std::string> out;
    for (const auto& [key, _] : entries_) {
      if (key.size() > prefix.size() && key.compare(0, prefix.size(), prefix) == 0) {
        out.push_back(key);
      }
    }
    return out;
  }

  /// Rejects any key no loader asked for — almost always a typo.
  void finish() const {
    for (const auto& [key, entry] : entries_) {
      require(entry.consumed, ErrorCode::config,
              name_ + ": line " + std::to_string(entry.line) + ": unknown key '" + key + "'");
    }
  }

  const std::string& name() const { return name_; }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
    mutable bool consumed = false;
  };

  std::string describe(const std::string& key) const {
    const auto it = entries_.find(key);
    const std::size_t line = it == entries_.end() ? 0 : it->second.line;
    return name_ + ": line " + std::to_string(line) + ": key '" + key + "'";
  }

  void parse_line(std::string_view line, std::size_t line_no) {
    // Strip comment: '#' outside quotes.
    bool quoted = false;
    std::size_t cut = line.size();
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        cut = i;
        break;
      }
    }
    line = trim(line.substr(0, cut));
    if (line.empty()) return;

    const std::size_t eq = line.find('=');
    require(eq != std::string_view::npos, ErrorCode::config,
            name_ + ": line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key{trim(line.substr(0, eq))};
    std::string_view value = trim(line.substr(eq + 1));
    require(!key.empty(), ErrorCode::config,
            name_ + ": line " + std::to_string(line_no) + ": empty key");
    for (const char c : key) {
      const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-';
      require(ok, ErrorCode::config,
              name_ + ": line " + std::to_string(line_no) + ": bad key '" + key + "'");
    }
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    const auto [it, inserted] = entries_.emplace(key, Entry{std::string(value), line_no});
    require(inserted, ErrorCode::config,
            name_ + ": line " + std::to_string(line_no) + ": key '" + key +
                "' already set on line " + std::to_string(it->second.line));
  }

  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
      s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
      s.remove_suffix(1);
    }
    return s;
  }

  std::string name_;
  std::map<std::string, Entry> entries_;
};

/// Everything needed to synthesize one pollutant channel at both stations.
struct ChannelScenario {
  PollutantKind pollutant{};
  TruthSignalParams truth;
  SensorModel candidate_sensor;
  SensorModel reference_sensor;
  /// When set, the candidate per-sample noise is derived at run time from
  /// the target correlation instead of `candidate_sensor.noise_sigma_ugm3`.
  std::optional<double> target_pearson;
};

/// One document that pins a whole reproducible run: same config + seed in,
/// byte-identical artifacts out.
struct ScenarioConfig {
  UtcSeconds start = parse_rfc3339("2022-07-04T00:00:00Z");
  int hours = 34 * 7 * 24;
  std::string candidate_station = "lcs-01";
  std::string reference_station = "aurn-01";
  std::vector<ChannelScenario> channels;
  SamplingSchedule schedule = SamplingSchedule::even(10);
  std::uint32_t min_samples_per_hour = 5;
  ConnectivityPolicy policy;
  std::size_t buffer_capacity = 8760;
  MaskSpec mask = MaskSpec::parse("2023-01");
  std::uint64_t rng_seed = 42;
  std::filesystem::path out_dir = "out";
};

/// Full parsed configuration; the optional transport fields belong to the
/// serve/agent subcommands and stay unset unless configured.
struct Config {
  ScenarioConfig scenario;
  std::optional<Address> listen;
  std::optional<std::filesystem::path> data_dir;
  std::optional<Address> sink;
};

/// Built-in per-pollutant scenario: winter-peaked truth signals with
/// magnitudes loosely in urban ranges, a biased candidate sensor, a clean
/// reference instrument, and correlation targets for the noise derivation.
inline ChannelScenario default_channel_scenario(PollutantKind pollutant) {
  ChannelScenario ch;
  ch.pollutant = pollutant;
  ch.truth.seasonal_peak_month = 12;
  ch.candidate_sensor.rng_seed = 1;
  ch.reference_sensor.rng_seed = 2;
  switch (pollutant) {
    case PollutantKind::pm2_5:
      ch.truth.baseline_ugm3 = 12.0;
      ch.truth.diurnal_amplitude_ugm3 = 3.0;
      ch.truth.seasonal_amplitude_ugm3 = 5.0;
      ch.candidate_sensor.bias_ugm3 = 1.5;
      ch.target_pearson = 0.98;
      break;
    case PollutantKind::pm10:
      ch.truth.baseline_ugm3 = 20.0;
      ch.truth.diurnal_amplitude_ugm3 = 5.0;
      ch.truth.seasonal_amplitude_ugm3 = 7.0;
      ch.candidate_sensor.bias_ugm3 = -2.0;
      ch.target_pearson = 0.97;
      break;
    case PollutantKind::no2:
      ch.truth.baseline_ugm3 = 28.0;
      ch.truth.diurnal_amplitude_ugm3 = 9.0;
      ch.truth.seasonal_amplitude_ugm3 = 10.0;
      ch.candidate_sensor.bias_ugm3 = 3.0;
      ch.target_pearson = 0.97;
      break;
  }
  return ch;
}

inline ScenarioConfig default_scenario() {
  ScenarioConfig sc;
  for (const auto pollutant : kAllPollutants) {
    sc.channels.push_back(default_channel_scenario(pollutant));
  }
  return sc;
}

namespace detail {

inline std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = text.find(',', pos);
    const auto token =
        comma == std::string_view::npos ? text.substr(pos) : text.substr(pos, comma - pos);
    out.push_back(token);
    if (comma == std::string_view::npos) return out;
    pos = comma + 1;
  }
}

inline std::vector<OutageWindow> parse_outages(const std::string& text,
                                               const std::string& where) {
  std::vector<OutageWindow> out;
  if (text.empty()) return out;
  for (const auto token : split_list(text)) {
    const std::size_t slash = token.find('/');
    require(slash != std::string_view::npos, ErrorCode::config,
            where + ": outage must be begin/end, got '" + std::string(token) + "'");
    const auto begin = try_parse_rfc3339(token.substr(0, slash));
    const auto end = try_parse_rfc3339(token.substr(slash + 1));
    require(begin && end && *begin < *end, ErrorCode::config,
            where + ": bad outage window '" + std::string(token) + "'");
    out.push_back({*begin, *end});
  }
  return out;
}

}  // namespace detail

/// Loads the full configuration, applying built-in defaults for every absent
/// key and rejecting unknown keys, invalid values, and inconsistent
/// combinations with `config` errors that name the file and line.
inline Config load_config(FlatConfig cfg) {
  Config out;
  ScenarioConfig& sc = out.scenario;
  const ScenarioConfig defaults;

  sc.start = cfg.take_instant("start", defaults.start);
  require(is_hour_aligned(sc.start), ErrorCode::config,
          cfg.name() + ": 'start' must be on an exact hour");

  const bool has_weeks = cfg.has("weeks");
  const bool has_hours = cfg.has("hours");
  require(!(has_weeks && has_hours), ErrorCode::config,
          cfg.name() + ": set either 'weeks' or 'hours', not both");
  if (has_hours) {
    const auto hours = cfg.take_int("hours", 0);
    require(hours >= 1, ErrorCode::config, cfg.name() + ": 'hours' must be >= 1");
    sc.hours = static_cast<int>(hours);
  } else {
    const auto weeks = cfg.take_int("weeks", 34);
    require(weeks >= 1, ErrorCode::config, cfg.name() + ": 'weeks' must be >= 1");
    sc.hours = static_cast<int>(weeks) * 7 * 24;
  }

  sc.candidate_station = cfg.take_string("candidate_station", defaults.candidate_station);
  sc.reference_station = cfg.take_string("reference_station", defaults.reference_station);
  require(is_valid_station_id(sc.candidate_station), ErrorCode::config,
          cfg.name() + ": bad candidate_station");
  require(is_valid_station_id(sc.reference_station), ErrorCode::config,
          cfg.name() + ": bad reference_station");
  require(sc.candidate_station != sc.reference_station, ErrorCode::config,
          cfg.name() + ": candidate and reference stations must differ");

  const auto samples_per_hour = cfg.take_int("samples_per_hour", 10);
  require(samples_per_hour >= 1 && samples_per_hour <= 3600, ErrorCode::config,
          cfg.name() + ": samples_per_hour must be in [1, 3600]");
  sc.schedule = SamplingSchedule::even(static_cast<int>(samples_per_hour));

  const auto min_samples = cfg.take_int("min_samples_per_hour", 5);
  require(min_samples >= 1 && min_samples <= samples_per_hour, ErrorCode::config,
          cfg.name() + ": min_samples_per_hour must be in [1, samples_per_hour]");
  sc.min_samples_per_hour = static_cast<std::uint32_t>(min_samples);

  const auto session_minutes = cfg.take_int("session_max_minutes", 30);
  require(session_minutes >= 1, ErrorCode::config,
          cfg.name() + ": session_max_minutes must be >= 1");
  sc.policy.session_max = std::chrono::minutes{session_minutes};
  const auto reconnect_seconds = cfg.take_int("reconnect_delay_seconds", 5);
  require(reconnect_seconds >= 0, ErrorCode::config,
          cfg.name() + ": reconnect_delay_seconds must be >= 0");
  sc.policy.reconnect_delay = std::chrono::seconds{reconnect_seconds};
  sc.policy.outages = detail::parse_outages(cfg.take_string("outages", ""), cfg.name());

  const auto capacity = cfg.take_int("buffer_capacity", 8760);
  require(capacity >= 1, ErrorCode::config, cfg.name() + ": buffer_capacity must be >= 1");
  sc.buffer_capacity = static_cast<std::size_t>(capacity);

  sc.rng_seed = cfg.take_u64("rng_seed", defaults.rng_seed);
  try {
    sc.mask = MaskSpec::parse(cfg.take_string("mask", "2023-01"));
  } catch (const Error& e) {
    raise(ErrorCode::config, cfg.name() + ": " + e.what());
  }
  sc.out_dir = cfg.take_string("out_dir", defaults.out_dir.string());

  std::vector<PollutantKind> pollutants;
  const std::string pollutant_list = cfg.take_string("pollutants", "pm2_5,pm10,no2");
  for (const auto token : detail::split_list(pollutant_list)) {
    const auto p = try_parse_pollutant(token);
    require(p.has_value(), ErrorCode::config,
            cfg.name() + ": unknown pollutant '" + std::string(token) + "' in 'pollutants'");
    for (const auto seen : pollutants) {
      require(seen != *p, ErrorCode::config,
              cfg.name() + ": pollutant '" + std::string(token) + "' listed twice");
    }
    pollutants.push_back(*p);
  }

  for (const auto pollutant : pollutants) {
    ChannelScenario ch = default_channel_scenario(pollutant);
    const std::string prefix = "channel." + std::string(wire_token(pollutant)) + ".";
    ch.truth.baseline_ugm3 = cfg.take_double(prefix + "baseline", ch.truth.baseline_ugm3);
    ch.truth.diurnal_amplitude_ugm3 =
        cfg.take_double(prefix + "diurnal_amplitude", ch.truth.diurnal_amplitude_ugm3);
    ch.truth.seasonal_amplitude_ugm3 =
        cfg.take_double(prefix + "seasonal_amplitude", ch.truth.seasonal_amplitude_ugm3);
    const auto peak_month =
        cfg.take_int(prefix + "seasonal_peak_month", ch.truth.seasonal_peak_month);
    require(peak_month >= 1 && peak_month <= 12, ErrorCode::config,
            cfg.name() + ": " + prefix + "seasonal_peak_month must be in [1, 12]");
    ch.truth.seasonal_peak_month = static_cast<int>(peak_month);
    const auto peak_hour = cfg.take_int(prefix + "diurnal_peak_hour", 8);
    require(peak_hour >= 0 && peak_hour <= 23, ErrorCode::config,
            cfg.name() + ": " + prefix + "diurnal_peak_hour must be in [0, 23]");
    ch.truth.diurnal_peak_time = std::chrono::hours{peak_hour};
    ch.truth.seasonal_anchor_year = static_cast<int>(civil_date(sc.start).year());

    ch.candidate_sensor.bias_ugm3 = cfg.take_double(prefix + "bias", ch.candidate_sensor.bias_ugm3);
    ch.candidate_sensor.drift_ugm3_per_day =
        cfg.take_double(prefix + "drift_per_day", ch.candidate_sensor.drift_ugm3_per_day);
    ch.reference_sensor.bias_ugm3 =
        cfg.take_double(prefix + "reference_bias", ch.reference_sensor.bias_ugm3);
    ch.reference_sensor.noise_sigma_ugm3 =
        cfg.take_double(prefix + "reference_noise_sigma", ch.reference_sensor.noise_sigma_ugm3);

    const bool has_sigma = cfg.has(prefix + "noise_sigma");
    const bool has_target = cfg.has(prefix + "target_pearson");
    require(!(has_sigma && has_target), ErrorCode::config,
            cfg.name() + ": set either " + prefix + "noise_sigma or " + prefix +
                "target_pearson, not both");
    if (has_sigma) {
      ch.candidate_sensor.noise_sigma_ugm3 = cfg.take_double(prefix + "noise_sigma", 0.0);
      require(ch.candidate_sensor.noise_sigma_ugm3 >= 0.0, ErrorCode::config,
              cfg.name() + ": " + prefix + "noise_sigma must be >= 0");
      ch.target_pearson.reset();
    } else {
      const double target = cfg.take_double(prefix + "target_pearson", *ch.target_pearson);
      require(target > 0.0 && target <= 1.0, ErrorCode::config,
              cfg.name() + ": " + prefix + "target_pearson must be in (0, 1]");
      ch.target_pearson = target;
    }

    try {
      validate(ch.truth);
      validate(ch.candidate_sensor);
      validate(ch.reference_sensor);
    } catch (const Error& e) {
      raise(ErrorCode::config, cfg.name() + ": " + prefix + "*: " + e.what());
    }
    sc.channels.push_back(std::move(ch));
  }

  if (const auto listen = cfg.take("listen")) out.listen = parse_address(*listen);
  if (const auto sink = cfg.take("sink")) out.sink = parse_address(*sink);
  if (const auto data_dir = cfg.take("data_dir")) out.data_dir = *data_dir;

  cfg.finish();
  return out;
}

inline Config load_config_file(const std::filesystem::path& path) {
  return load_config(FlatConfig::parse_file(path));
}

}  // namespace aqmon
