#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "aqmon/error.hpp"

namespace aqmon {

/// The three monitored pollutant channels. Concentrations are µg/m³ throughout.
enum class PollutantKind { pm2_5, pm10, no2 };

inline constexpr std::array<PollutantKind, 3> kAllPollutants{
    PollutantKind::pm2_5, PollutantKind::pm10, PollutantKind::no2};

/// Canonical lowercase token used in CSV files, wire records and store paths.
constexpr std::string_view wire_token(PollutantKind p) {
  switch (p) {
    case PollutantKind::pm2_5: return "pm2_5";
    case PollutantKind::pm10: return "pm10";
    case PollutantKind::no2: return "no2";
  }
  return "?";
}

/// Human-facing name used in report tables.
constexpr std::string_view display_name(PollutantKind p) {
  switch (p) {
    case PollutantKind::pm2_5: return "PM2.5";
    case PollutantKind::pm10: return "PM10";
    case PollutantKind::no2: return "NO2";
  }
  return "?";
}

constexpr std::optional<PollutantKind> try_parse_pollutant(std::string_view token) {
  for (PollutantKind p : kAllPollutants) {
    if (token == wire_token(p)) return p;
  }
  return std::nullopt;
}

inline PollutantKind parse_pollutant(std::string_view token) {
  const auto p = try_parse_pollutant(token);
  if (!p) raise(ErrorCode::parse, "unknown pollutant token '" + std::string(token) + "'");
  return *p;
}

}  // namespace aqmon
