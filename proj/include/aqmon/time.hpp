#pragma once

#include <cctype>
#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "aqmon/error.hpp"

namespace aqmon {

/// All timestamps in the pipeline are UTC instants at second resolution.
/// Local time never enters the system; hour buckets are therefore unambiguous.
using UtcSeconds = std::chrono::sys_seconds;

inline UtcSeconds floor_hour(UtcSeconds t) {
  return std::chrono::floor<std::chrono::hours>(t);
}

inline bool is_hour_aligned(UtcSeconds t) { return floor_hour(t) == t; }

inline std::chrono::year_month_day civil_date(UtcSeconds t) {
  return std::chrono::year_month_day{std::chrono::floor<std::chrono::days>(t)};
}

/// UTC calendar month containing `t`.
inline std::chrono::year_month month_of(UtcSeconds t) {
  const auto ymd = civil_date(t);
  return ymd.year() / ymd.month();
}

inline UtcSeconds month_begin(std::chrono::year_month ym) {
  return UtcSeconds{std::chrono::sys_days{ym / std::chrono::day{1}}};
}

inline UtcSeconds month_end(std::chrono::year_month ym) {
  return month_begin(ym + std::chrono::months{1});
}

inline std::chrono::hours hours_in_month(std::chrono::year_month ym) {
  return std::chrono::duration_cast<std::chrono::hours>(month_end(ym) - month_begin(ym));
}

namespace detail {

inline bool all_digits(std::string_view s) {
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return !s.empty();
}

inline int to_int(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

}  // namespace detail

/// Strict RFC 3339 timestamp, UTC only: `YYYY-MM-DDTHH:MM:SSZ`.
/// Offsets, fractional seconds and leap seconds are rejected.
inline std::optional<UtcSeconds> try_parse_rfc3339(std::string_view s) {
  using namespace std::chrono;
  if (s.size() != 20) return std::nullopt;
  if (s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' || s[16] != ':' || s[19] != 'Z')
    return std::nullopt;
  const auto year_s = s.substr(0, 4), mon_s = s.substr(5, 2), day_s = s.substr(8, 2);
  const auto hh_s = s.substr(11, 2), mm_s = s.substr(14, 2), ss_s = s.substr(17, 2);
  for (auto part : {year_s, mon_s, day_s, hh_s, mm_s, ss_s}) {
    if (!detail::all_digits(part)) return std::nullopt;
  }
  const year_month_day ymd =
      year{detail::to_int(year_s)} / month{unsigned(detail::to_int(mon_s))} /
      day{unsigned(detail::to_int(day_s))};
  if (!ymd.ok()) return std::nullopt;
  const int hh = detail::to_int(hh_s), mm = detail::to_int(mm_s), ss = detail::to_int(ss_s);
  if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
  return UtcSeconds{sys_days{ymd}} + hours{hh} + minutes{mm} + seconds{ss};
}

inline UtcSeconds parse_rfc3339(std::string_view s) {
  const auto t = try_parse_rfc3339(s);
  if (!t) raise(ErrorCode::parse, "bad RFC 3339 UTC timestamp '" + std::string(s) + "'");
  return *t;
}

inline std::string format_rfc3339(UtcSeconds t) {
  using namespace std::chrono;
  const auto d = floor<days>(t);
  const year_month_day ymd{d};
  const hh_mm_ss<seconds> tod{t - d};
  char buf[72];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()));
  return buf;
}

/// Calendar month as `YYYY-MM`.
inline std::optional<std::chrono::year_month> try_parse_year_month(std::string_view s) {
  using namespace std::chrono;
  if (s.size() != 7 || s[4] != '-') return std::nullopt;
  const auto year_s = s.substr(0, 4), mon_s = s.substr(5, 2);
  if (!detail::all_digits(year_s) || !detail::all_digits(mon_s)) return std::nullopt;
  const int m = detail::to_int(mon_s);
  if (m < 1 || m > 12) return std::nullopt;
  return year{detail::to_int(year_s)} / month{unsigned(m)};
}

inline std::chrono::year_month parse_year_month(std::string_view s) {
  const auto ym = try_parse_year_month(s);
  if (!ym) raise(ErrorCode::parse, "bad calendar month '" + std::string(s) + "', expected YYYY-MM");
  return *ym;
}

inline std::string format_year_month(std::chrono::year_month ym) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", int(ym.year()), unsigned(ym.month()));
  return buf;
}

}  // namespace aqmon
