#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "aqmon/agent.hpp"
#include "aqmon/hourly.hpp"
#include "aqmon/wire.hpp"

namespace aqmon {

enum class IngestStatus { accepted, duplicate };

/// Durable home of hourly records: one append-only log per channel at
/// `<data_dir>/<station_id>/<pollutant>.log`, each line the wire form of one
/// record. The full key index (station, pollutant, bucket_start) is rebuilt
/// from the logs on open, which is what makes duplicate detection survive
/// restarts. A trailing line without a newline is a torn append from a crash:
/// it is discarded (and counted) on open, and the record it held is safe to
/// retransmit because its ack was never sent.
class Store {
 public:
  using Key = std::tuple<std::string, PollutantKind, UtcSeconds>;

  explicit Store(std::filesystem::path data_dir) : data_dir_(std::move(data_dir)) {
    std::error_code ec;
    std::filesystem::create_directories(data_dir_, ec);
    require(!ec && std::filesystem::is_directory(data_dir_), ErrorCode::io,
            "cannot create data directory '" + data_dir_.string() + "'");
    replay_logs();
  }

  /// First write under a key appends durably and reports `accepted`; any
  /// later write under the same key reports `duplicate` and changes nothing.
  /// An I/O failure raises before anything is indexed, so no acknowledgment
  /// can precede the durable append.
  IngestStatus ingest(const HourlyRecord& rec) {
    require(is_valid_station_id(rec.station_id), ErrorCode::precondition,
            "bad station_id '" + rec.station_id + "'");
    require(is_hour_aligned(rec.bucket_start), ErrorCode::precondition,
            "bucket_start must be hour-aligned");

    const std::lock_guard<std::mutex> lock(mutex_);
    const Key key{rec.station_id, rec.pollutant, rec.bucket_start};
    if (records_.contains(key)) return IngestStatus::duplicate;

    std::ofstream& log = open_log(rec.station_id, rec.pollutant);
    log << serialize_record(rec) << '\n';
    log.flush();
    require(log.good(), ErrorCode::io, "append failed for '" + rec.station_id + "/" +
                                           std::string(wire_token(rec.pollutant)) + ".log'");
    records_.emplace(key, rec);
    return IngestStatus::accepted;
  }

  /// Records with from <= bucket_start < to for one channel, ascending.
  /// Stored-MISSING records are returned; absent hours are simply not there.
  std::vector<HourlyRecord> query_range(const std::string& station_id, PollutantKind pollutant,
                                        UtcSeconds from, UtcSeconds to) const {
    require(from < to, ErrorCode::precondition, "query range is inverted or empty");
    require(is_hour_aligned(from) && is_hour_aligned(to), ErrorCode::precondition,
            "query bounds must be hour-aligned");
    const std::lock_guard<std::mutex> lock(mutex_);
    std::vector<HourlyRecord> out;
    const auto lo = records_.lower_bound(Key{station_id, pollutant, from});
    const auto hi = records_.lower_bound(Key{station_id, pollutant, to});
    for (auto it = lo; it != hi; ++it) out.push_back(it->second);
    return out;
  }

  /// Everything stored for one channel, ascending by hour.
  std::vector<HourlyRecord> channel_records(const std::string& station_id,
                                            PollutantKind pollutant) const {
    const std::lock_guard<std::mutex> lock(mutex_);
    std::vector<HourlyRecord> out;
    const auto lo = records_.lower_bound(Key{station_id, pollutant, UtcSeconds::min()});
    const auto hi = records_.upper_bound(Key{station_id, pollutant, UtcSeconds::max()});
    for (auto it = lo; it != hi; ++it) out.push_back(it->second);
    return out;
  }

  /// [first, last] bucket_start for one channel, or nullopt when empty.
  std::optional<std::pair<UtcSeconds, UtcSeconds>> channel_span(const std::string& station_id,
                                                                PollutantKind pollutant) const {
    const auto recs = channel_records(station_id, pollutant);
    if (recs.empty()) return std::nullopt;
    return std::make_pair(recs.front().bucket_start, recs.back().bucket_start);
  }

  std::vector<std::string> stations() const {
    const std::lock_guard<std::mutex> lock(mutex_);
    std::set<std::string> seen;
    for (const auto& [key, _] : records_) seen.insert(std::get<0>(key));
    return {seen.begin(), seen.end()};
  }

  std::vector<PollutantKind> pollutants(const std::string& station_id) const {
    const std::lock_guard<std::mutex> lock(mutex_);
    std::set<PollutantKind> seen;
    for (const auto& [key, _] : records_) {
      if (std::get<0>(key) == station_id) seen.insert(std::get<1>(key));
    }
    return {seen.begin(), seen.end()};
  }

  std::size_t size() const {
    const std::lock_guard<std::mutex> lock(mutex_);
    return records_.size();
  }

  /// Torn trailing lines discarded while replaying logs on open.
  std::size_t discarded_partial_lines() const { return discarded_partial_lines_; }

  const std::filesystem::path& data_dir() const { return data_dir_; }

 private:
  std::ofstream& open_log(const std::string& station_id, PollutantKind pollutant) {
    const auto path_key = std::make_pair(station_id, pollutant);
    auto it = logs_.find(path_key);
    if (it != logs_.end()) return it->second;

    const std::filesystem::path dir = data_dir_ / station_id;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, ErrorCode::io, "cannot create '" + dir.string() + "'");
    const std::filesystem::path path = dir / (std::string(wire_token(pollutant)) + ".log");
    std::ofstream log(path, std::ios::app);
    require(log.good(), ErrorCode::io, "cannot open '" + path.string() + "' for append");
    return logs_.emplace(path_key, std::move(log)).first->second;
  }

  void replay_logs() {
    for (const auto& station_entry : std::filesystem::directory_iterator(data_dir_)) {
      if (!station_entry.is_directory()) continue;
      const std::string station = station_entry.path().filename().string();
      if (!is_valid_station_id(station)) continue;
      for (const auto pollutant : kAllPollutants) {
        const auto path =
            station_entry.path() / (std::string(wire_token(pollutant)) + ".log");
        if (std::filesystem::exists(path)) replay_one(path, station, pollutant);
      }
    }
  }

  void replay_one(const std::filesystem::path& path, const std::string& station,
                  PollutantKind pollutant) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::io, "cannot open '" + path.string() + "'");
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
      const std::size_t nl = content.find('\n', pos);
      if (nl == std::string::npos) {
        // Torn tail: the process died between write and newline. The record
        // was never acknowledged, so dropping it loses nothing.
        ++discarded_partial_lines_;
        break;
      }
      ++line_no;
      const std::string_view line(content.data() + pos, nl - pos);
      pos = nl + 1;
      if (line.empty()) continue;

      const std::string where = path.string() + ": line " + std::to_string(line_no);
      auto parsed = parse_wire_record(line);
      if (const auto* err = std::get_if<WireError>(&parsed)) {
        raise(ErrorCode::data_integrity, where + ": " + err->detail);
      }
      const auto& w = std::get<WireRecord>(parsed);
      require(w.station == station && w.pollutant == pollutant, ErrorCode::data_integrity,
              where + ": record does not belong to this log");
      const auto [_, inserted] =
          records_.emplace(Key{w.station, w.pollutant, w.hour}, to_hourly(w));
      require(inserted, ErrorCode::data_integrity, where + ": duplicate key in log");
    }
  }

  std::filesystem::path data_dir_;
  mutable std::mutex mutex_;
  std::map<Key, HourlyRecord> records_;
  std::map<std::pair<std::string, PollutantKind>, std::ofstream> logs_;
  std::size_t discarded_partial_lines_ = 0;
};

/// In-process sink writing straight into a Store — the `simulate` transport.
/// Both `accepted` and `duplicate` acknowledge (the record is durable either
/// way); a storage failure yields no acknowledgment, so the agent keeps the
/// record queued. `per_record_cost` charges the session budget per delivery,
/// which is how tests model a slow uplink.
class StoreSink : public RecordSink {
 public:
  explicit StoreSink(Store& store, std::chrono::milliseconds per_record_cost = {})
      : store_(store), per_record_cost_(per_record_cost) {}

  std::optional<std::chrono::milliseconds> deliver(const HourlyRecord& rec) override {
    try {
      store_.ingest(rec);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::io) return std::nullopt;
      throw;
    }
    return per_record_cost_;
  }

 private:
  Store& store_;
  std::chrono::milliseconds per_record_cost_;
};

}  // namespace aqmon
