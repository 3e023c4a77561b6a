#pragma once

#include <algorithm>
#include <chrono>
#include <vector>

#include "aqmon/error.hpp"
#include "aqmon/time.hpp"

namespace aqmon {

/// Within-hour sampling plan: offsets from the top of the hour at which a
/// sensor is polled. Offsets are strictly increasing and all inside the hour,
/// so every hour produces the same number of ticks and each tick lands in its
/// own bucket exactly once.
struct SamplingSchedule {
  std::vector<std::chrono::seconds> offsets;

  /// n evenly spaced polls per hour starting at the top: 0, 3600/n, ...
  /// The default plan (n = 10) polls at minutes 0, 6, 12, ..., 54.
  static SamplingSchedule even(int samples_per_hour) {
    require(samples_per_hour >= 1 && samples_per_hour <= 3600, ErrorCode::precondition,
            "samples_per_hour must be in [1, 3600]");
    SamplingSchedule s;
    s.offsets.reserve(static_cast<std::size_t>(samples_per_hour));
    for (int i = 0; i < samples_per_hour; ++i) {
      s.offsets.emplace_back(3600LL * i / samples_per_hour);
    }
    return s;
  }

  int samples_per_hour() const { return static_cast<int>(offsets.size()); }
};

inline void validate(const SamplingSchedule& s) {
  require(!s.offsets.empty(), ErrorCode::precondition, "schedule must have at least one offset");
  for (std::size_t i = 0; i < s.offsets.size(); ++i) {
    require(s.offsets[i] >= std::chrono::seconds{0} && s.offsets[i] < std::chrono::hours{1},
            ErrorCode::precondition, "schedule offsets must lie within the hour");
    if (i > 0) {
      require(s.offsets[i] > s.offsets[i - 1], ErrorCode::precondition,
              "schedule offsets must be strictly increasing");
    }
  }
}

/// All sampling instants for the hours in [begin, end): begin and end must be
/// hour-aligned. Result is strictly increasing with
/// hours(end - begin) * samples_per_hour entries.
inline std::vector<UtcSeconds> schedule_ticks(const SamplingSchedule& s, UtcSeconds begin,
                                              UtcSeconds end) {
  validate(s);
  require(is_hour_aligned(begin) && is_hour_aligned(end), ErrorCode::precondition,
          "tick range must be hour-aligned");
  require(begin <= end, ErrorCode::precondition, "tick range must not be inverted");
  std::vector<UtcSeconds> ticks;
  const auto hours = std::chrono::duration_cast<std::chrono::hours>(end - begin).count();
  ticks.reserve(static_cast<std::size_t>(hours) * s.offsets.size());
  for (UtcSeconds hour = begin; hour < end; hour += std::chrono::hours{1}) {
    for (const auto off : s.offsets) ticks.push_back(hour + off);
  }
  return ticks;
}

}  // namespace aqmon
