#pragma once

#include <chrono>
#include <cmath>
#include <numbers>

#include "aqmon/error.hpp"
#include "aqmon/time.hpp"

namespace aqmon {

/// Deterministic "true" concentration signal: a baseline plus a 24-hour and a
/// 365.25-day sinusoid. The seasonal component peaks mid-way through
/// `seasonal_peak_month` of `seasonal_anchor_year`; winter-peaked defaults give
/// the elevated cold-month concentrations seen at urban monitoring sites.
struct TruthSignalParams {
  double baseline_ugm3 = 10.0;
  double diurnal_amplitude_ugm3 = 0.0;
  double seasonal_amplitude_ugm3 = 0.0;
  int seasonal_peak_month = 12;  // 1..12
  int seasonal_anchor_year = 2022;
  std::chrono::seconds diurnal_peak_time{8 * 3600};  // time of day (UTC) of the diurnal max
};

inline constexpr std::chrono::seconds kDiurnalPeriod{24 * 3600};
inline constexpr std::chrono::seconds kSeasonalPeriod{
    static_cast<long long>(365.25 * 24 * 3600)};

inline void validate(const TruthSignalParams& p) {
  require(std::isfinite(p.baseline_ugm3) && p.baseline_ugm3 >= 0.0, ErrorCode::precondition,
          "truth baseline must be finite and >= 0");
  require(p.diurnal_amplitude_ugm3 >= 0.0 && p.seasonal_amplitude_ugm3 >= 0.0,
          ErrorCode::precondition, "truth amplitudes must be >= 0");
  require(p.baseline_ugm3 - p.diurnal_amplitude_ugm3 - p.seasonal_amplitude_ugm3 >= 0.0,
          ErrorCode::precondition,
          "baseline - diurnal_amplitude - seasonal_amplitude must be >= 0");
  require(p.seasonal_peak_month >= 1 && p.seasonal_peak_month <= 12, ErrorCode::precondition,
          "seasonal_peak_month must be in 1..12");
  require(p.diurnal_peak_time >= std::chrono::seconds{0} && p.diurnal_peak_time < kDiurnalPeriod,
          ErrorCode::precondition, "diurnal_peak_time must lie within the day");
}

/// Instant at which the seasonal cosine attains its maximum: the midpoint of
/// the peak month in the anchor year.
inline UtcSeconds seasonal_peak_instant(const TruthSignalParams& p) {
  using namespace std::chrono;
  const year_month ym = year{p.seasonal_anchor_year} / month{unsigned(p.seasonal_peak_month)};
  const UtcSeconds begin = month_begin(ym);
  return begin + (month_end(ym) - begin) / 2;
}

/// Truth concentration at instant `t`. Total on valid params and >= 0 by the
/// amplitude invariant.
inline double truth_at(const TruthSignalParams& p, UtcSeconds t) {
  using namespace std::chrono;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  const seconds seconds_of_day = t - floor<days>(t);
  const double diurnal_phase =
      double((seconds_of_day - p.diurnal_peak_time).count()) / double(kDiurnalPeriod.count());
  const double diurnal = p.diurnal_amplitude_ugm3 * std::cos(two_pi * diurnal_phase);

  const double seasonal_phase = double((t - seasonal_peak_instant(p)).count()) /
                                double(kSeasonalPeriod.count());
  const double seasonal = p.seasonal_amplitude_ugm3 * std::cos(two_pi * seasonal_phase);

  return p.baseline_ugm3 + diurnal + seasonal;
}

}  // namespace aqmon
