#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aqmon/align.hpp"
#include "aqmon/csv.hpp"
#include "aqmon/stats.hpp"

namespace aqmon {

/// Statistics for one pollutant row. Any statistic whose preconditions fail
/// (too few pairs, constant series) is absent with the reason recorded — an
/// explicit N/A in the rendered table, never a NaN.
struct ChannelAnalysis {
  PollutantKind pollutant{};
  std::size_t n_pairs = 0;
  std::optional<double> pearson_r;
  std::optional<double> spearman_rho;
  std::optional<LinearFit> calibration;
  std::string na_reason;
  std::optional<std::pair<UtcSeconds, UtcSeconds>> span;  // [first, last] paired hour
};

struct CorrelationReport {
  std::vector<ChannelAnalysis> channels;
  std::vector<std::chrono::year_month> masked_months;
};

/// Computes every statistic that is defined for the pairs, recording the
/// first unavailable one's reason instead of failing the whole report.
inline ChannelAnalysis analyze_channel(const AlignedSeries& series) {
  ChannelAnalysis out;
  out.pollutant = series.pollutant;
  out.n_pairs = series.n_pairs();
  if (!series.pairs.empty()) {
    out.span = std::make_pair(series.pairs.front().hour, series.pairs.back().hour);
  }

  const auto candidate = series.candidate_values();
  const auto reference = series.reference_values();
  const auto note_unavailable = [&out](const Error& e) {
    if (out.na_reason.empty()) out.na_reason = e.what();
  };

  try {
    out.pearson_r = pearson(candidate, reference);
  } catch (const Error& e) {
    note_unavailable(e);
  }
  try {
    out.spearman_rho = spearman(candidate, reference);
  } catch (const Error& e) {
    note_unavailable(e);
  }
  try {
    out.calibration = fit_linear_calibration(candidate, reference);
  } catch (const Error& e) {
    note_unavailable(e);
  }
  return out;
}

inline CorrelationReport build_report(std::span<const AlignedSeries> channels,
                                      const MaskSpec& mask) {
  validate(mask);
  CorrelationReport report;
  report.channels.reserve(channels.size());
  for (const auto& series : channels) report.channels.push_back(analyze_channel(series));
  report.masked_months = mask.months;
  return report;
}

namespace detail {

inline std::string format_2dp(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string format_3dp(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  while (s.size() < width) s.push_back(' ');
  return s;
}

}  // namespace detail

/// Plain-text report table. Correlations carry two decimals; slope and
/// intercept three (full precision lives in the JSON sidecar). Unavailable
/// statistics print as N/A, with reasons listed under the table.
inline std::string render_report_text(const CorrelationReport& report) {
  const std::vector<std::string> headers = {"Pollution Type", "Pearson's R", "Spearman's",
                                            "n_pairs",        "slope",       "intercept"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& ch : report.channels) {
    std::vector<std::string> row;
    row.emplace_back(display_name(ch.pollutant));
    row.push_back(ch.pearson_r ? detail::format_2dp(*ch.pearson_r) : "N/A");
    row.push_back(ch.spearman_rho ? detail::format_2dp(*ch.spearman_rho) : "N/A");
    row.push_back(std::to_string(ch.n_pairs));
    row.push_back(ch.calibration ? detail::format_3dp(ch.calibration->slope) : "N/A");
    row.push_back(ch.calibration ? detail::format_3dp(ch.calibration->intercept) : "N/A");
    rows.push_back(std::move(row));
  }

  std::vector<std::size_t> widths;
  for (std::size_t c = 0; c < headers.size(); ++c) {
    std::size_t w = headers[c].size();
    for (const auto& row : rows) w = std::max(w, row[c].size());
    widths.push_back(w);
  }

  std::string text;
  const auto emit_row = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) text += " | ";
      text += c + 1 < cells.size() ? detail::pad(cells[c], widths[c]) : cells[c];
    }
    text += '\n';
  };
  emit_row(headers);
  std::size_t rule_width = 3 * (headers.size() - 1);
  for (const auto w : widths) rule_width += w;
  text += std::string(rule_width, '-') + '\n';
  for (const auto& row : rows) emit_row(row);

  text += '\n';
  if (report.masked_months.empty()) {
    text += "Masked months: none\n";
  } else {
    text += "Masked months:";
    for (const auto& ym : report.masked_months) text += ' ' + format_year_month(ym);
    text += '\n';
  }
  for (const auto& ch : report.channels) {
    if (ch.span) {
      text += std::string(display_name(ch.pollutant)) + " hours paired: " +
              format_rfc3339(ch.span->first) + " .. " + format_rfc3339(ch.span->second) + '\n';
    }
    if (!ch.na_reason.empty()) {
      text += std::string(display_name(ch.pollutant)) + " N/A: " + ch.na_reason + '\n';
    }
  }
  return text;
}

/// Machine-readable sidecar with full double precision. Key order is fixed
/// and doubles use shortest-round-trip formatting, so equal reports produce
/// identical bytes.
inline nlohmann::ordered_json report_to_json(const CorrelationReport& report) {
  nlohmann::ordered_json j;
  j["channels"] = nlohmann::ordered_json::array();
  for (const auto& ch : report.channels) {
    nlohmann::ordered_json c;
    c["pollutant"] = wire_token(ch.pollutant);
    c["display_name"] = display_name(ch.pollutant);
    c["n_pairs"] = ch.n_pairs;
    c["pearson_r"] = ch.pearson_r ? nlohmann::ordered_json(*ch.pearson_r)
                                  : nlohmann::ordered_json(nullptr);
    c["spearman_rho"] = ch.spearman_rho ? nlohmann::ordered_json(*ch.spearman_rho)
                                        : nlohmann::ordered_json(nullptr);
    if (ch.calibration) {
      c["calibration"] = {{"slope", ch.calibration->slope},
                          {"intercept", ch.calibration->intercept},
                          {"r_squared", ch.calibration->r_squared}};
    } else {
      c["calibration"] = nullptr;
    }
    if (!ch.na_reason.empty()) c["na_reason"] = ch.na_reason;
    if (ch.span) {
      c["first_hour"] = format_rfc3339(ch.span->first);
      c["last_hour"] = format_rfc3339(ch.span->second);
    }
    j["channels"].push_back(std::move(c));
  }
  j["masked_months"] = nlohmann::ordered_json::array();
  for (const auto& ym : report.masked_months) j["masked_months"].push_back(format_year_month(ym));
  return j;
}

/// Plot-ready pairs: one CSV per pollutant for external charting.
inline void write_pairs_csv(const std::filesystem::path& path, const AlignedSeries& series) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot write '" + path.string() + "'");
  out << "bucket_start_utc,candidate_ugm3,reference_ugm3\n";
  for (const auto& p : series.pairs) {
    out << format_rfc3339(p.hour) << ',' << detail::format_shortest(p.candidate_ugm3) << ','
        << detail::format_shortest(p.reference_ugm3) << '\n';
  }
  out.flush();
  require(out.good(), ErrorCode::io, "write failed for '" + path.string() + "'");
}

}  // namespace aqmon
