#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>

#include "aqmon/sample.hpp"
#include "aqmon/truth.hpp"

namespace aqmon {

/// Imperfection model of a low-cost sensor: constant bias, linear drift and
/// additive Gaussian noise drawn from a seeded stream. A zeroed model is a
/// perfect (reference-grade) instrument.
struct SensorModel {
  double bias_ugm3 = 0.0;
  double noise_sigma_ugm3 = 0.0;  // >= 0
  double drift_ugm3_per_day = 0.0;
  std::uint64_t rng_seed = 1;
};

inline void validate(const SensorModel& m) {
  require(std::isfinite(m.bias_ugm3) && std::isfinite(m.noise_sigma_ugm3) &&
              std::isfinite(m.drift_ugm3_per_day),
          ErrorCode::precondition, "sensor model fields must be finite");
  require(m.noise_sigma_ugm3 >= 0.0, ErrorCode::precondition, "noise_sigma must be >= 0");
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Stable per-channel seed derived from a run seed plus the channel identity,
/// so channels get independent noise streams regardless of iteration order.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view station_id,
                                 PollutantKind pollutant) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
  };
  mix(station_id);
  mix("/");
  mix(wire_token(pollutant));
  std::uint64_t state = base ^ h;
  splitmix64(state);
  return splitmix64(state);
}

/// Source of raw samples for one channel. `sample_at` returns std::nullopt
/// once the source is exhausted (only replay sources exhaust).
class SensorBackend {
 public:
  virtual ~SensorBackend() = default;
  virtual std::optional<RawSample> sample_at(UtcSeconds t) = 0;
};

/// Synthetic sensor: truth signal plus the imperfection model.
///
///   value(t) = truth_at(t) + bias + drift_rate * elapsed_days + N(0, sigma)
///
/// The Gaussian stream is seeded, so a fixed (seed, query sequence) yields a
/// byte-identical sample sequence. Negative values are kept as-is.
class SyntheticSensor : public SensorBackend {
 public:
  SyntheticSensor(std::string station_id, PollutantKind pollutant, TruthSignalParams truth,
                  SensorModel model, UtcSeconds deployment_start)
      : station_id_(std::move(station_id)),
        pollutant_(pollutant),
        truth_(truth),
        model_(model),
        deployment_start_(deployment_start),
        rng_(model.rng_seed) {
    validate(truth_);
    validate(model_);
  }

  std::optional<RawSample> sample_at(UtcSeconds t) override {
    require(t >= deployment_start_, ErrorCode::precondition,
            "sample requested before deployment start");
    const double elapsed_days =
        std::chrono::duration<double, std::chrono::days::period>(t - deployment_start_).count();
    double value = truth_at(truth_, t) + model_.bias_ugm3 +
                   model_.drift_ugm3_per_day * elapsed_days;
    if (model_.noise_sigma_ugm3 > 0.0) value += model_.noise_sigma_ugm3 * gauss_(rng_);
    return RawSample{station_id_, pollutant_, t, value};
  }

  const SensorModel& model() const { return model_; }
  const TruthSignalParams& truth() const { return truth_; }

 private:
  std::string station_id_;
  PollutantKind pollutant_;
  TruthSignalParams truth_;
  SensorModel model_;
  UtcSeconds deployment_start_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

}  // namespace aqmon
