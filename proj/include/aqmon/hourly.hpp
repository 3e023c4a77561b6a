#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aqmon/pollutant.hpp"
#include "aqmon/sample.hpp"
#include "aqmon/time.hpp"

namespace aqmon {

/// Mean concentration for one (station, pollutant, hour) bucket. A bucket is
/// labeled by its start instant and covers [bucket_start, bucket_start + 1h).
/// `mean_ugm3` is empty when the hour is MISSING (fewer than the configured
/// minimum of contributing samples); `n_samples` is kept either way so data
/// loss stays visible downstream.
struct HourlyRecord {
  std::string station_id;
  PollutantKind pollutant{PollutantKind::pm2_5};
  UtcSeconds bucket_start{};
  std::optional<double> mean_ugm3;
  std::uint32_t n_samples = 0;

  bool missing() const { return !mean_ugm3.has_value(); }
};

inline bool operator==(const HourlyRecord& a, const HourlyRecord& b) {
  return a.station_id == b.station_id && a.pollutant == b.pollutant &&
         a.bucket_start == b.bucket_start && a.mean_ugm3 == b.mean_ugm3 &&
         a.n_samples == b.n_samples;
}

/// Collects within-hour sample values for one channel.
class HourAccumulator {
 public:
  HourAccumulator(std::string station_id, PollutantKind pollutant, UtcSeconds bucket_start,
                  std::uint32_t capacity)
      : station_id_(std::move(station_id)),
        pollutant_(pollutant),
        bucket_start_(bucket_start),
        capacity_(capacity) {
    require(is_hour_aligned(bucket_start_), ErrorCode::precondition,
            "accumulator bucket_start must be hour-aligned");
    require(capacity_ > 0, ErrorCode::precondition, "accumulator capacity must be positive");
    collected_.reserve(capacity_);
  }

  bool covers(UtcSeconds t) const {
    return t >= bucket_start_ && t < bucket_start_ + std::chrono::hours{1};
  }

  void collect(UtcSeconds t, double value_ugm3) {
    require(covers(t), ErrorCode::precondition, "sample timestamp outside the hour bucket");
    require(collected_.size() < capacity_, ErrorCode::precondition,
            "accumulator already holds a full hour of samples");
    require(std::isfinite(value_ugm3), ErrorCode::precondition, "sample value is not finite");
    collected_.push_back(value_ugm3);
  }

  UtcSeconds bucket_start() const { return bucket_start_; }
  PollutantKind pollutant() const { return pollutant_; }
  const std::string& station_id() const { return station_id_; }
  const std::vector<double>& collected() const { return collected_; }

 private:
  std::string station_id_;
  PollutantKind pollutant_;
  UtcSeconds bucket_start_;
  std::uint32_t capacity_;
  std::vector<double> collected_;
};

/// Closes the hour: the record is MISSING when fewer than
/// `min_samples_per_hour` samples arrived, otherwise it carries their
/// arithmetic mean. The accumulator is consumed.
inline HourlyRecord close_hour(HourAccumulator&& acc, std::uint32_t min_samples_per_hour) {
  require(min_samples_per_hour >= 1, ErrorCode::precondition,
          "min_samples_per_hour must be >= 1");
  HourlyRecord rec;
  rec.station_id = acc.station_id();
  rec.pollutant = acc.pollutant();
  rec.bucket_start = acc.bucket_start();
  rec.n_samples = static_cast<std::uint32_t>(acc.collected().size());
  if (rec.n_samples >= min_samples_per_hour) {
    double sum = 0.0;
    for (double v : acc.collected()) sum += v;
    rec.mean_ugm3 = sum / rec.n_samples;
  }
  return rec;
}

}  // namespace aqmon
