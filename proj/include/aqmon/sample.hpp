#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "aqmon/pollutant.hpp"
#include "aqmon/time.hpp"

namespace aqmon {

/// Station ids are opaque but constrained to a filesystem- and wire-safe
/// alphabet, since they name store directories.
inline bool is_valid_station_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_';
    if (!ok) return false;
  }
  return true;
}

/// One timestamped concentration reading from one sensor channel.
/// Values may be negative (cheap sensors do emit negatives); clamping
/// happens only at calibration/reporting time, never here.
struct RawSample {
  std::string station_id;
  PollutantKind pollutant{PollutantKind::pm2_5};
  UtcSeconds timestamp{};
  double value_ugm3 = 0.0;
};

inline void validate(const RawSample& s) {
  require(!s.station_id.empty(), ErrorCode::precondition, "raw sample station_id is empty");
  require(std::isfinite(s.value_ugm3), ErrorCode::precondition,
          "raw sample value is not finite");
}

}  // namespace aqmon
