#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aqmon/buffer.hpp"
#include "aqmon/clock.hpp"
#include "aqmon/connectivity.hpp"
#include "aqmon/csv.hpp"
#include "aqmon/hourly.hpp"
#include "aqmon/schedule.hpp"
#include "aqmon/sensor.hpp"

namespace aqmon {

/// Destination for hourly records. `deliver` returns the session time the
/// acknowledged delivery consumed, or std::nullopt when no acknowledgment
/// arrived (the record must stay queued; the ingest side deduplicates, so a
/// later retransmission is safe).
class RecordSink {
 public:
  virtual ~RecordSink() = default;
  virtual std::optional<std::chrono::milliseconds> deliver(const HourlyRecord& rec) = 0;
};

struct TransmitOutcome {
  std::size_t sent = 0;
  std::size_t remaining = 0;
  std::uint64_t dropped_total = 0;
  std::chrono::milliseconds session_elapsed{0};
};

/// Drains the buffer over ONE connected session. Nothing is attempted while
/// `now` falls in an outage window. Records go out in FIFO order; each is
/// removed only once acknowledged. The session closes when the buffer empties,
/// the sink stops acknowledging, or the session budget runs out — an
/// acknowledgment that would arrive past `session_max` is treated as lost
/// (the gateway has already cut the connection), so that record stays queued.
inline TransmitOutcome transmit_pending(ForwardBuffer& buffer, const ConnectivityPolicy& policy,
                                        UtcSeconds now, RecordSink& sink) {
  validate(policy);
  TransmitOutcome out;
  if (!policy.in_outage(now)) {
    while (!buffer.empty() && out.session_elapsed < policy.session_max) {
      const auto cost = sink.deliver(buffer.front());
      if (!cost) break;
      require(*cost >= std::chrono::milliseconds{0}, ErrorCode::precondition,
              "sink reported a negative delivery cost");
      if (out.session_elapsed + *cost > policy.session_max) {
        out.session_elapsed = policy.session_max;
        break;
      }
      out.session_elapsed += *cost;
      buffer.acknowledge_front();
      ++out.sent;
    }
  }
  out.remaining = buffer.size();
  out.dropped_total = buffer.dropped_oldest();
  return out;
}

/// One (station, pollutant) channel and the backend that produces its raw
/// samples. The backend pointer is non-owning.
struct AgentChannelSpec {
  std::string station_id;
  PollutantKind pollutant;
  SensorBackend* backend = nullptr;
};

struct ChannelCounts {
  std::string station_id;
  PollutantKind pollutant{};
  std::uint64_t raw_samples = 0;
  std::uint64_t hourly_records = 0;
  std::uint64_t missing_hours = 0;
  std::uint64_t dropped_records = 0;
  bool exhausted = false;
};

/// One connected session as seen by the transmitter: when it opened, how many
/// records it delivered, and how much session time it consumed.
struct SessionStats {
  UtcSeconds opened_at{};
  std::size_t sent = 0;
  std::chrono::milliseconds elapsed{0};
};

struct AgentSummary {
  std::vector<ChannelCounts> channels;
  std::uint64_t produced = 0;  // hourly records enqueued across channels
  std::uint64_t sent = 0;
  std::uint64_t remaining = 0;
  std::uint64_t dropped = 0;
  std::uint64_t sessions = 0;
  std::size_t max_session_records = 0;
  std::chrono::milliseconds longest_session{0};
  std::vector<SessionStats> session_trace;
};

struct AgentOptions {
  SamplingSchedule schedule = SamplingSchedule::even(10);
  ConnectivityPolicy policy{};
  std::uint32_t min_samples_per_hour = 5;
  std::size_t buffer_capacity = 8760;
  std::optional<std::filesystem::path> raw_spool;
  std::optional<std::filesystem::path> hourly_spool;
};

/// Runs the sampling/aggregation/transmission loop for `n_hours` starting at
/// the hour-aligned `begin`. Every scheduled tick polls every live channel;
/// at each hour boundary every channel closes exactly one HourlyRecord
/// (MISSING when too few samples arrived, including after backend
/// exhaustion), records are enqueued on one shared FIFO buffer, and the
/// transmitter drains the buffer in back-to-back sessions until it is empty
/// or a session makes no progress.
///
/// The loop is single-threaded: the transmitter runs between hour boundaries
/// and its session clock is accounted separately from the sampling clock, as
/// if draining happened on a parallel task. With a real clock and a slow sink
/// this approximation can delay later ticks past their instants.
inline AgentSummary run_agent(const std::vector<AgentChannelSpec>& channels, RecordSink& sink,
                              Clock& clock, UtcSeconds begin, int n_hours,
                              const AgentOptions& options) {
  validate(options.schedule);
  validate(options.policy);
  require(!channels.empty(), ErrorCode::precondition, "run_agent needs at least one channel");
  require(is_hour_aligned(begin), ErrorCode::precondition, "begin must be hour-aligned");
  require(n_hours >= 1, ErrorCode::precondition, "duration must be at least one hour");
  for (const auto& ch : channels) {
    require(ch.backend != nullptr, ErrorCode::precondition, "channel backend is null");
    require(is_valid_station_id(ch.station_id), ErrorCode::precondition,
            "bad station_id '" + ch.station_id + "'");
  }

  AgentSummary summary;
  summary.channels.reserve(channels.size());
  for (const auto& ch : channels) {
    ChannelCounts c;
    c.station_id = ch.station_id;
    c.pollutant = ch.pollutant;
    summary.channels.push_back(std::move(c));
  }

  std::optional<RawCsvWriter> raw_spool;
  if (options.raw_spool) raw_spool.emplace(*options.raw_spool);
  std::optional<HourlyCsvWriter> hourly_spool;
  if (options.hourly_spool) hourly_spool.emplace(*options.hourly_spool);

  ForwardBuffer buffer(options.buffer_capacity);

  const auto attribute_drop = [&](const HourlyRecord& lost) {
    for (auto& c : summary.channels) {
      if (c.station_id == lost.station_id && c.pollutant == lost.pollutant) {
        ++c.dropped_records;
        return;
      }
    }
  };

  for (int h = 0; h < n_hours; ++h) {
    const UtcSeconds hour = begin + std::chrono::hours{h};

    std::vector<HourAccumulator> accs;
    accs.reserve(channels.size());
    for (const auto& ch : channels) {
      accs.emplace_back(ch.station_id, ch.pollutant, hour,
                        static_cast<std::size_t>(options.schedule.samples_per_hour()));
    }

    for (const auto offset : options.schedule.offsets) {
      const UtcSeconds tick = hour + offset;
      clock.wait_until(tick);
      for (std::size_t i = 0; i < channels.size(); ++i) {
        auto& counts = summary.channels[i];
        if (counts.exhausted) continue;
        const auto sample = channels[i].backend->sample_at(tick);
        if (!sample) {
          counts.exhausted = true;
          continue;
        }
        validate(*sample);
        ++counts.raw_samples;
        if (raw_spool) raw_spool->append(*sample);
        // Bucket by the sample's own timestamp: a replayed row outside the
        // current hour is kept in the raw trail but contributes to no mean.
        if (sample->station_id == channels[i].station_id &&
            sample->pollutant == channels[i].pollutant && accs[i].covers(sample->timestamp)) {
          accs[i].collect(sample->timestamp, sample->value_ugm3);
        }
      }
    }

    for (std::size_t i = 0; i < channels.size(); ++i) {
      HourlyRecord rec = close_hour(std::move(accs[i]), options.min_samples_per_hour);
      auto& counts = summary.channels[i];
      ++counts.hourly_records;
      if (rec.missing()) ++counts.missing_hours;
      if (hourly_spool) hourly_spool->append(rec);
      if (auto lost = buffer.push(std::move(rec))) attribute_drop(*lost);
      ++summary.produced;
    }

    const UtcSeconds hour_end = hour + std::chrono::hours{1};
    clock.wait_until(hour_end);
    while (!buffer.empty() && !options.policy.in_outage(clock.now())) {
      const auto outcome = transmit_pending(buffer, options.policy, clock.now(), sink);
      ++summary.sessions;
      summary.sent += outcome.sent;
      summary.max_session_records = std::max(summary.max_session_records, outcome.sent);
      summary.longest_session = std::max(summary.longest_session, outcome.session_elapsed);
      summary.session_trace.push_back({clock.now(), outcome.sent, outcome.session_elapsed});
      if (outcome.sent == 0) break;
    }
  }

  if (raw_spool) raw_spool->flush();
  if (hourly_spool) hourly_spool->flush();

  summary.remaining = buffer.size();
  summary.dropped = buffer.dropped_oldest();
  return summary;
}

}  // namespace aqmon
