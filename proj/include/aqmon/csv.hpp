#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aqmon/hourly.hpp"
#include "aqmon/sample.hpp"
#include "aqmon/sensor.hpp"

namespace aqmon {

// Raw-sample CSV: `station_id,pollutant,timestamp_utc,value_ugm3`, RFC 3339
// timestamps, values with up to 4 fractional digits, UTF-8, LF line endings.
inline constexpr std::string_view kRawCsvHeader = "station_id,pollutant,timestamp_utc,value_ugm3";

// Hourly spool CSV: `mean_value_ugm3` is empty for MISSING hours.
inline constexpr std::string_view kHourlyCsvHeader =
    "station_id,pollutant,bucket_start_utc,mean_value_ugm3,n_samples";

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

inline std::optional<double> parse_decimal(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string format_fixed4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string format_shortest(double v) {
  char buf[48];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Strips one trailing '\r' so CRLF input is tolerated; output is always LF.
inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace detail

/// Streaming reader over a raw-sample CSV file: returns rows in file order,
/// one RawSample per row, std::nullopt at end of stream. Malformed rows raise
/// a parse error naming the line number.
class RawCsvReader {
 public:
  explicit RawCsvReader(const std::filesystem::path& path)
      : owned_(std::make_unique<std::ifstream>(path)), in_(owned_.get()), name_(path.string()) {
    require(owned_->good(), ErrorCode::io, "cannot open raw CSV '" + name_ + "'");
  }

  explicit RawCsvReader(std::istream& in, std::string name = "<stream>")
      : in_(&in), name_(std::move(name)) {}

  std::optional<RawSample> next() {
    std::string line;
    while (std::getline(*in_, line)) {
      ++line_no_;
      const std::string_view body = detail::strip_cr(line);
      if (line_no_ == 1) {
        require(body == kRawCsvHeader, ErrorCode::parse,
                name_ + ": line 1: expected header '" + std::string(kRawCsvHeader) + "'");
        continue;
      }
      if (body.empty()) continue;
      return parse_row(body);
    }
    return std::nullopt;
  }

 private:
  RawSample parse_row(std::string_view body) const {
    const auto fields = detail::split_fields(body);
    const std::string where = name_ + ": line " + std::to_string(line_no_);
    require(fields.size() == 4, ErrorCode::parse, where + ": expected 4 fields");
    RawSample s;
    s.station_id = std::string(fields[0]);
    require(is_valid_station_id(s.station_id), ErrorCode::parse, where + ": bad station_id");
    const auto pollutant = try_parse_pollutant(fields[1]);
    require(pollutant.has_value(), ErrorCode::parse,
            where + ": unknown pollutant token '" + std::string(fields[1]) + "'");
    s.pollutant = *pollutant;
    const auto ts = try_parse_rfc3339(fields[2]);
    require(ts.has_value(), ErrorCode::parse, where + ": bad timestamp");
    s.timestamp = *ts;
    const auto value = detail::parse_decimal(fields[3]);
    require(value.has_value(), ErrorCode::parse, where + ": bad value");
    s.value_ugm3 = *value;
    return s;
  }

  std::unique_ptr<std::ifstream> owned_;
  std::istream* in_;
  std::string name_;
  std::size_t line_no_ = 0;
};

/// Appends raw samples to a CSV file, writing the header on a fresh file.
class RawCsvWriter {
 public:
  explicit RawCsvWriter(const std::filesystem::path& path) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    require(out_.good(), ErrorCode::io, "cannot open raw CSV '" + path.string() + "' for append");
    if (fresh) out_ << kRawCsvHeader << '\n';
  }

  void append(const RawSample& s) {
    out_ << s.station_id << ',' << wire_token(s.pollutant) << ',' << format_rfc3339(s.timestamp)
         << ',' << detail::format_fixed4(s.value_ugm3) << '\n';
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

/// Replay backend: feeds recorded raw samples to the agent, optionally
/// filtered to one (station, pollutant) channel. The tick instant passed by
/// the agent is ignored; rows keep their recorded timestamps, so replaying a
/// spool reproduces the original deployment when the agent clock covers the
/// recorded span.
class ReplaySensor : public SensorBackend {
 public:
  explicit ReplaySensor(const std::filesystem::path& csv) : reader_(csv) {}

  ReplaySensor(const std::filesystem::path& csv, std::string station_id, PollutantKind pollutant)
      : reader_(csv), station_filter_(std::move(station_id)), pollutant_filter_(pollutant) {}

  std::optional<RawSample> sample_at(UtcSeconds) override {
    while (auto row = reader_.next()) {
      if (station_filter_ && row->station_id != *station_filter_) continue;
      if (pollutant_filter_ && row->pollutant != *pollutant_filter_) continue;
      return row;
    }
    return std::nullopt;
  }

 private:
  RawCsvReader reader_;
  std::optional<std::string> station_filter_;
  std::optional<PollutantKind> pollutant_filter_;
};

/// Appends hourly records to the spool CSV (crash-recovery trail).
class HourlyCsvWriter {
 public:
  explicit HourlyCsvWriter(const std::filesystem::path& path) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    require(out_.good(), ErrorCode::io,
            "cannot open hourly CSV '" + path.string() + "' for append");
    if (fresh) out_ << kHourlyCsvHeader << '\n';
  }

  void append(const HourlyRecord& rec) {
    out_ << rec.station_id << ',' << wire_token(rec.pollutant) << ','
         << format_rfc3339(rec.bucket_start) << ',';
    if (rec.mean_ugm3) out_ << detail::format_shortest(*rec.mean_ugm3);
    out_ << ',' << rec.n_samples << '\n';
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

/// Reads a whole hourly spool CSV (analysis input path).
inline std::vector<HourlyRecord> read_hourly_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot open hourly CSV '" + path.string() + "'");
  std::vector<HourlyRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = detail::strip_cr(line);
    if (line_no == 1) {
      require(body == kHourlyCsvHeader, ErrorCode::parse,
              path.string() + ": line 1: expected header '" + std::string(kHourlyCsvHeader) + "'");
      continue;
    }
    if (body.empty()) continue;
    const auto fields = detail::split_fields(body);
    const std::string where = path.string() + ": line " + std::to_string(line_no);
    require(fields.size() == 5, ErrorCode::parse, where + ": expected 5 fields");
    HourlyRecord rec;
    rec.station_id = std::string(fields[0]);
    require(is_valid_station_id(rec.station_id), ErrorCode::parse, where + ": bad station_id");
    const auto pollutant = try_parse_pollutant(fields[1]);
    require(pollutant.has_value(), ErrorCode::parse, where + ": unknown pollutant token");
    rec.pollutant = *pollutant;
    const auto ts = try_parse_rfc3339(fields[2]);
    require(ts.has_value() && is_hour_aligned(*ts), ErrorCode::parse,
            where + ": bad or misaligned bucket_start");
    rec.bucket_start = *ts;
    if (!fields[3].empty()) {
      const auto mean = detail::parse_decimal(fields[3]);
      require(mean.has_value(), ErrorCode::parse, where + ": bad mean value");
      rec.mean_ugm3 = mean;
    }
    const auto n = detail::parse_decimal(fields[4]);
    require(n.has_value() && *n >= 0 && *n == static_cast<std::uint32_t>(*n), ErrorCode::parse,
            where + ": bad n_samples");
    rec.n_samples = static_cast<std::uint32_t>(*n);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace aqmon
