#pragma once

#include <algorithm>
#include <chrono>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aqmon/hourly.hpp"
#include "aqmon/time.hpp"

namespace aqmon {

/// Calendar months (UTC) excluded from analysis on both sides — the honest
/// treatment of known data-loss periods: drop them, never impute them.
struct MaskSpec {
  std::vector<std::chrono::year_month> months;

  /// Parses a comma-separated list like "2023-01" or "2022-12,2023-01".
  /// An empty string means no masking.
  static MaskSpec parse(std::string_view text) {
    MaskSpec mask;
    if (text.empty()) return mask;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = text.find(',', pos);
      const std::string_view token =
          comma == std::string_view::npos ? text.substr(pos) : text.substr(pos, comma - pos);
      const auto ym = try_parse_year_month(token);
      require(ym.has_value(), ErrorCode::config,
              "bad mask month '" + std::string(token) + "' (want YYYY-MM)");
      require(std::find(mask.months.begin(), mask.months.end(), *ym) == mask.months.end(),
              ErrorCode::config, "mask month '" + std::string(token) + "' listed twice");
      mask.months.push_back(*ym);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    return mask;
  }

  bool contains(UtcSeconds t) const {
    const auto ym = month_of(t);
    return std::find(months.begin(), months.end(), ym) != months.end();
  }

  bool empty() const { return months.empty(); }
};

inline void validate(const MaskSpec& mask) {
  const std::set<std::chrono::year_month> unique(mask.months.begin(), mask.months.end());
  require(unique.size() == mask.months.size(), ErrorCode::precondition,
          "mask months must be unique");
}

/// One co-located hour with both instruments reporting.
struct AlignedPair {
  UtcSeconds hour{};
  double candidate_ugm3 = 0.0;
  double reference_ugm3 = 0.0;

  friend bool operator==(const AlignedPair&, const AlignedPair&) = default;
};

/// The paired evidence for one pollutant: hours where candidate and reference
/// both have a present mean and the month is not masked, ascending by hour.
struct AlignedSeries {
  PollutantKind pollutant{};
  std::vector<AlignedPair> pairs;

  std::size_t n_pairs() const { return pairs.size(); }

  std::vector<double> candidate_values() const {
    std::vector<double> v;
    v.reserve(pairs.size());
    for (const auto& p : pairs) v.push_back(p.candidate_ugm3);
    return v;
  }

  std::vector<double> reference_values() const {
    std::vector<double> v;
    v.reserve(pairs.size());
    for (const auto& p : pairs) v.push_back(p.reference_ugm3);
    return v;
  }
};

namespace detail {

inline void check_aligned_input(std::span<const HourlyRecord> series, PollutantKind pollutant,
                                std::string_view label) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    require(series[i].pollutant == pollutant, ErrorCode::precondition,
            std::string(label) + " series mixes pollutants");
    require(is_hour_aligned(series[i].bucket_start), ErrorCode::precondition,
            std::string(label) + " series has a misaligned hour");
    if (i > 0) {
      require(series[i - 1].bucket_start != series[i].bucket_start, ErrorCode::data_integrity,
              std::string(label) + " series repeats hour " +
                  format_rfc3339(series[i].bucket_start));
      require(series[i - 1].bucket_start < series[i].bucket_start, ErrorCode::precondition,
              std::string(label) + " series is not sorted ascending");
    }
  }
}

}  // namespace detail

/// Pairs candidate and reference hours for one pollutant. An hour survives
/// only when both sides have a present (non-MISSING) mean and the hour's
/// month is not masked; everything else is dropped, never interpolated.
inline AlignedSeries align(PollutantKind pollutant, std::span<const HourlyRecord> candidate,
                           std::span<const HourlyRecord> reference, const MaskSpec& mask) {
  validate(mask);
  detail::check_aligned_input(candidate, pollutant, "candidate");
  detail::check_aligned_input(reference, pollutant, "reference");

  AlignedSeries out;
  out.pollutant = pollutant;
  std::size_t ci = 0;
  std::size_t ri = 0;
  while (ci < candidate.size() && ri < reference.size()) {
    const auto& c = candidate[ci];
    const auto& r = reference[ri];
    if (c.bucket_start < r.bucket_start) {
      ++ci;
    } else if (r.bucket_start < c.bucket_start) {
      ++ri;
    } else {
      if (c.mean_ugm3 && r.mean_ugm3 && !mask.contains(c.bucket_start)) {
        out.pairs.push_back({c.bucket_start, *c.mean_ugm3, *r.mean_ugm3});
      }
      ++ci;
      ++ri;
    }
  }
  return out;
}

struct MonthlySummaryRow {
  std::chrono::year_month month;
  double mean_ugm3 = 0.0;
  double max_ugm3 = 0.0;
  std::uint32_t n_hours = 0;
};

/// Calendar-month (UTC) roll-up of one hourly series. MISSING hours
/// contribute nothing; months with no present hours are omitted entirely.
inline std::vector<MonthlySummaryRow> monthly_summary(std::span<const HourlyRecord> series) {
  for (std::size_t i = 1; i < series.size(); ++i) {
    require(series[i - 1].bucket_start < series[i].bucket_start, ErrorCode::precondition,
            "series must be sorted ascending without repeats");
  }
  std::vector<MonthlySummaryRow> rows;
  double sum = 0.0;
  for (const auto& rec : series) {
    if (!rec.mean_ugm3) continue;
    const auto month = month_of(rec.bucket_start);
    if (rows.empty() || rows.back().month != month) {
      rows.push_back({month, 0.0, *rec.mean_ugm3, 0});
      sum = 0.0;
    }
    auto& row = rows.back();
    sum += *rec.mean_ugm3;
    row.max_ugm3 = std::max(row.max_ugm3, *rec.mean_ugm3);
    ++row.n_hours;
    row.mean_ugm3 = sum / row.n_hours;
  }
  return rows;
}

}  // namespace aqmon
