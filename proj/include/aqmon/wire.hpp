#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "aqmon/hourly.hpp"
#include "aqmon/sample.hpp"

namespace aqmon {

inline constexpr int kWireSchemaVersion = 1;

/// One hourly record as it travels on the wire: a single JSON object per
/// line, e.g.
///   {"v":1,"station":"ncc-01","pollutant":"no2","hour":"2022-11-01T14:00:00Z","mean":41.2,"n":10}
/// `mean` is null for a MISSING hour. Round-trips losslessly to HourlyRecord.
struct WireRecord {
  int version = kWireSchemaVersion;
  std::string station;
  PollutantKind pollutant{};
  UtcSeconds hour{};
  std::optional<double> mean;
  std::uint32_t n = 0;

  friend bool operator==(const WireRecord&, const WireRecord&) = default;
};

/// Reasons a wire line is rejected; the token becomes the `err:<code>`
/// response line.
enum class WireErrorCode {
  syntax,      // not a single well-formed JSON object with exactly the known keys
  version,     // unsupported schema version
  station,     // station id empty or containing unsafe characters
  pollutant,   // unknown pollutant token
  timestamp,   // hour field is not an RFC 3339 UTC instant
  alignment,   // hour field is not on an exact hour
  n_samples,   // n is negative or not an integer
  value,       // mean is neither null nor a finite number
};

constexpr std::string_view wire_error_token(WireErrorCode code) {
  switch (code) {
    case WireErrorCode::syntax: return "syntax";
    case WireErrorCode::version: return "version";
    case WireErrorCode::station: return "station";
    case WireErrorCode::pollutant: return "pollutant";
    case WireErrorCode::timestamp: return "timestamp";
    case WireErrorCode::alignment: return "alignment";
    case WireErrorCode::n_samples: return "n_samples";
    case WireErrorCode::value: return "value";
  }
  return "unknown";
}

struct WireError {
  WireErrorCode code;
  std::string detail;
};

using WireParseResult = std::variant<WireRecord, WireError>;

inline WireRecord to_wire(const HourlyRecord& rec) {
  return WireRecord{kWireSchemaVersion, rec.station_id, rec.pollutant,
                    rec.bucket_start,   rec.mean_ugm3,  rec.n_samples};
}

inline HourlyRecord to_hourly(const WireRecord& w) {
  return HourlyRecord{w.station, w.pollutant, w.hour, w.mean, w.n};
}

/// Serializes to exactly one line (no trailing newline). Key order is fixed;
/// doubles use the shortest representation that round-trips, so serializing
/// the same record always yields the same bytes.
inline std::string serialize_wire_record(const WireRecord& w) {
  nlohmann::ordered_json j;
  j["v"] = w.version;
  j["station"] = w.station;
  j["pollutant"] = wire_token(w.pollutant);
  j["hour"] = format_rfc3339(w.hour);
  if (w.mean) {
    j["mean"] = *w.mean;
  } else {
    j["mean"] = nullptr;
  }
  j["n"] = w.n;
  return j.dump();
}

inline std::string serialize_record(const HourlyRecord& rec) {
  return serialize_wire_record(to_wire(rec));
}

/// Parses and validates one wire line. Never throws on bad input: every
/// rejection is a structured WireError carrying the response token.
inline WireParseResult parse_wire_record(std::string_view line) {
  const auto fail = [](WireErrorCode code, std::string detail) {
    return WireParseResult{WireError{code, std::move(detail)}};
  };

  const nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    return fail(WireErrorCode::syntax, "line is not a JSON object");
  }

  static constexpr std::string_view kKeys[] = {"v", "station", "pollutant", "hour", "mean", "n"};
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const auto k : kKeys) known = known || key == k;
    if (!known) return fail(WireErrorCode::syntax, "unknown key '" + key + "'");
  }
  for (const auto k : kKeys) {
    if (!j.contains(k)) return fail(WireErrorCode::syntax, "missing key '" + std::string(k) + "'");
  }

  if (!j["v"].is_number_integer()) return fail(WireErrorCode::syntax, "v must be an integer");
  const auto version = j["v"].get<std::int64_t>();
  if (version != kWireSchemaVersion) {
    return fail(WireErrorCode::version, "unsupported schema version " + std::to_string(version));
  }

  if (!j["station"].is_string()) return fail(WireErrorCode::syntax, "station must be a string");
  std::string station = j["station"].get<std::string>();
  if (!is_valid_station_id(station)) {
    return fail(WireErrorCode::station, "bad station id '" + station + "'");
  }

  if (!j["pollutant"].is_string()) return fail(WireErrorCode::syntax, "pollutant must be a string");
  const auto pollutant = try_parse_pollutant(j["pollutant"].get<std::string>());
  if (!pollutant) {
    return fail(WireErrorCode::pollutant,
                "unknown pollutant token '" + j["pollutant"].get<std::string>() + "'");
  }

  if (!j["hour"].is_string()) return fail(WireErrorCode::syntax, "hour must be a string");
  const auto hour = try_parse_rfc3339(j["hour"].get<std::string>());
  if (!hour) {
    return fail(WireErrorCode::timestamp, "bad hour '" + j["hour"].get<std::string>() + "'");
  }
  if (!is_hour_aligned(*hour)) {
    return fail(WireErrorCode::alignment, "hour not aligned: " + j["hour"].get<std::string>());
  }

  std::optional<double> mean;
  if (!j["mean"].is_null()) {
    if (!j["mean"].is_number()) return fail(WireErrorCode::value, "mean must be null or a number");
    const double m = j["mean"].get<double>();
    if (!std::isfinite(m)) return fail(WireErrorCode::value, "mean is not finite");
    mean = m;
  }

  if (!j["n"].is_number_integer()) return fail(WireErrorCode::n_samples, "n must be an integer");
  const auto n = j["n"].get<std::int64_t>();
  if (n < 0) return fail(WireErrorCode::n_samples, "n must be >= 0");
  if (n > 0xFFFFFFFFLL) return fail(WireErrorCode::n_samples, "n out of range");

  WireRecord w;
  w.version = static_cast<int>(version);
  w.station = std::move(station);
  w.pollutant = *pollutant;
  w.hour = *hour;
  w.mean = mean;
  w.n = static_cast<std::uint32_t>(n);
  return WireParseResult{std::move(w)};
}

}  // namespace aqmon
