#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "aqmon/error.hpp"

namespace aqmon {

namespace detail {

inline void check_paired_input(std::span<const double> x, std::span<const double> y,
                               std::size_t min_n) {
  require(x.size() == y.size(), ErrorCode::precondition, "series lengths differ");
  require(x.size() >= min_n, ErrorCode::insufficient_data,
          "need at least " + std::to_string(min_n) + " pairs, got " + std::to_string(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(std::isfinite(x[i]) && std::isfinite(y[i]), ErrorCode::precondition,
            "series values must be finite");
  }
}

inline bool all_equal(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
}

struct PairedMoments {
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  double mean_x = 0.0;
  double mean_y = 0.0;
};

/// Two-pass centered sums: mean first, then products of deviations. Much
/// better conditioned than the single-pass expansion when means are large
/// relative to the spread.
inline PairedMoments paired_moments(std::span<const double> x, std::span<const double> y) {
  PairedMoments m;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.mean_x += x[i];
    m.mean_y += y[i];
  }
  m.mean_x /= n;
  m.mean_y /= n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mean_x;
    const double dy = y[i] - m.mean_y;
    m.sxx += dx * dx;
    m.syy += dy * dy;
    m.sxy += dx * dy;
  }
  return m;
}

}  // namespace detail

/// Sample Pearson correlation coefficient. Requires at least 3 pairs and
/// variation on both sides; a constant series has no defined correlation and
/// is reported as an error, never as NaN. The result is clamped to [-1, 1]
/// to absorb last-bit rounding on perfectly collinear input.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  detail::check_paired_input(x, y, 3);
  require(!detail::all_equal(x) && !detail::all_equal(y), ErrorCode::undefined_correlation,
          "correlation undefined for a constant series");
  const auto m = detail::paired_moments(x, y);
  require(m.sxx > 0.0 && m.syy > 0.0, ErrorCode::undefined_correlation,
          "correlation undefined: no measurable variance");
  // sqrt of the product, not the product of sqrts: one rounding fewer, and
  // perfectly collinear input lands on +/-1 exactly.
  const double r = m.sxy / std::sqrt(m.sxx * m.syy);
  return std::clamp(r, -1.0, 1.0);
}

/// Ranks with ties sharing the average of the ranks they straddle (1-based):
/// average_ranks({10, 20, 20, 30}) == {1, 2.5, 2.5, 4}.
inline std::vector<double> average_ranks(std::span<const double> v) {
  for (const double a : v) {
    require(std::isfinite(a), ErrorCode::precondition, "rank input must be finite");
  }
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation: Pearson over the two average-rank vectors.
/// Strictly monotone transforms of either side leave it unchanged.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  detail::check_paired_input(x, y, 3);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  require(!detail::all_equal(rx) && !detail::all_equal(ry), ErrorCode::undefined_correlation,
          "rank correlation undefined: all values tied");
  const auto m = detail::paired_moments(rx, ry);
  require(m.sxx > 0.0 && m.syy > 0.0, ErrorCode::undefined_correlation,
          "rank correlation undefined: no rank variance");
  const double r = m.sxy / std::sqrt(m.sxx * m.syy);
  return std::clamp(r, -1.0, 1.0);
}

struct LinearFit {
  double slope = 1.0;
  double intercept = 0.0;
  double r_squared = 0.0;

  friend bool operator==(const LinearFit&, const LinearFit&) = default;
};

/// Ordinary least squares of reference on candidate:
/// reference ~ slope * candidate + intercept. This is the correction that
/// moves low-cost readings toward the reference instrument. A constant
/// reference fits exactly with slope 0; its r_squared is reported as 0
/// (no variance to explain), matching common statistics packages.
inline LinearFit fit_linear_calibration(std::span<const double> candidate,
                                        std::span<const double> reference) {
  detail::check_paired_input(candidate, reference, 3);
  require(!detail::all_equal(candidate), ErrorCode::degenerate_fit,
          "cannot fit a line to a constant candidate series");
  const auto m = detail::paired_moments(candidate, reference);
  require(m.sxx > 0.0, ErrorCode::degenerate_fit,
          "cannot fit a line: candidate series has no measurable variance");
  LinearFit fit;
  fit.slope = m.sxy / m.sxx;
  fit.intercept = m.mean_y - fit.slope * m.mean_x;
  fit.r_squared = m.syy > 0.0 ? (m.sxy / m.sxx) * (m.sxy / m.syy) : 0.0;
  return fit;
}

struct CalibratedSeries {
  std::vector<std::optional<double>> values;
  std::size_t clamped = 0;
};

/// Maps each present value through the fit; MISSING stays MISSING. A
/// corrected concentration below zero is physically meaningless, so it is
/// clamped to 0 and counted.
inline CalibratedSeries apply_calibration(std::span<const std::optional<double>> series,
                                          const LinearFit& fit) {
  CalibratedSeries out;
  out.values.reserve(series.size());
  for (const auto& v : series) {
    if (!v) {
      out.values.push_back(std::nullopt);
      continue;
    }
    double mapped = fit.slope * *v + fit.intercept;
    if (mapped < 0.0) {
      mapped = 0.0;
      ++out.clamped;
    }
    out.values.push_back(mapped);
  }
  return out;
}

}  // namespace aqmon
