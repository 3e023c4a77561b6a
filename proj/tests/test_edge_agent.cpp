#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <filesystem>
#include <random>
#include <vector>

#include "aqmon/agent.hpp"
#include "aqmon/buffer.hpp"
#include "aqmon/clock.hpp"
#include "aqmon/connectivity.hpp"
#include "aqmon/csv.hpp"

using namespace aqmon;
using namespace std::chrono;

namespace {

const UtcSeconds kStart = parse_rfc3339("2022-07-04T00:00:00Z");

HourlyRecord make_record(int hour_index,
                         const std::string& station = "lcs-01",
                         PollutantKind pollutant = PollutantKind::pm2_5) {
  return {station, pollutant, kStart + hours{hour_index}, 10.0 + hour_index, 10};
}

/// Scripted sink: fixed per-record cost, optional refusal pattern.
class ScriptedSink : public RecordSink {
 public:
  explicit ScriptedSink(milliseconds cost) : cost_(cost) {}

  std::optional<milliseconds> deliver(const HourlyRecord& rec) override {
    ++attempts_;
    if (refuse_every_ > 0 && attempts_ % refuse_every_ == 0) return std::nullopt;
    delivered_.push_back(rec);
    return cost_;
  }

  void refuse_every(int n) { refuse_every_ = n; }
  const std::vector<HourlyRecord>& delivered() const { return delivered_; }
  int attempts() const { return attempts_; }

 private:
  milliseconds cost_;
  int refuse_every_ = 0;
  int attempts_ = 0;
  std::vector<HourlyRecord> delivered_;
};

}  // namespace

TEST_CASE("forward buffer is FIFO and evicts oldest when full") {
  ForwardBuffer buffer(3);
  CHECK(buffer.empty());
  CHECK_THROWS_AS(buffer.front(), Error);
  CHECK_THROWS_AS(buffer.acknowledge_front(), Error);
  CHECK_THROWS_AS(ForwardBuffer{0}, Error);

  CHECK_FALSE(buffer.push(make_record(0)).has_value());
  CHECK_FALSE(buffer.push(make_record(1)).has_value());
  CHECK_FALSE(buffer.push(make_record(2)).has_value());
  CHECK(buffer.size() == 3);

  const auto evicted = buffer.push(make_record(3));
  REQUIRE(evicted.has_value());
  CHECK(*evicted == make_record(0));  // oldest went first
  CHECK(buffer.size() == 3);
  CHECK(buffer.dropped_oldest() == 1);
  CHECK(buffer.pushed() == 4);

  CHECK(buffer.front() == make_record(1));
  buffer.acknowledge_front();
  CHECK(buffer.front() == make_record(2));
  CHECK(buffer.acknowledged() == 1);
}

TEST_CASE("connectivity policy validation") {
  ConnectivityPolicy p;
  CHECK(p.session_max == minutes{30});
  CHECK_NOTHROW(validate(p));

  p.session_max = milliseconds{0};
  CHECK_THROWS_AS(validate(p), Error);
  p.session_max = minutes{30};
  p.reconnect_delay = seconds{-1};
  CHECK_THROWS_AS(validate(p), Error);
  p.reconnect_delay = seconds{5};
  p.outages = {{kStart + hours{2}, kStart + hours{1}}};  // inverted window
  CHECK_THROWS_AS(validate(p), Error);
}

TEST_CASE("a 30-minute session at one record per minute moves exactly 30 of 100") {
  ForwardBuffer buffer(200);
  for (int i = 0; i < 100; ++i) buffer.push(make_record(i));
  ScriptedSink sink(minutes{1});
  ConnectivityPolicy policy;  // 30-minute sessions

  const auto outcome = transmit_pending(buffer, policy, kStart, sink);
  CHECK(outcome.sent == 30);
  CHECK(outcome.remaining == 70);
  CHECK(outcome.session_elapsed == minutes{30});
  CHECK(sink.delivered().size() == 30);
  // FIFO: the 30 oldest went out, in order.
  for (int i = 0; i < 30; ++i) REQUIRE(sink.delivered()[i] == make_record(i));
  CHECK(buffer.front() == make_record(30));
}

TEST_CASE("an acknowledgment landing past the session cap is treated as lost") {
  ForwardBuffer buffer(10);
  buffer.push(make_record(0));
  buffer.push(make_record(1));
  ScriptedSink sink(minutes{18});  // two deliveries cross the 30-minute line
  ConnectivityPolicy policy;

  const auto outcome = transmit_pending(buffer, policy, kStart, sink);
  CHECK(outcome.sent == 1);
  CHECK(outcome.remaining == 1);  // second record stays queued for retransmission
  CHECK(outcome.session_elapsed == minutes{30});
  CHECK(sink.attempts() == 2);  // it was attempted, but the ack came too late
  CHECK(buffer.front() == make_record(1));
}

TEST_CASE("a session consuming exactly the budget keeps its last record") {
  ForwardBuffer buffer(10);
  for (int i = 0; i < 5; ++i) buffer.push(make_record(i));
  ScriptedSink sink(minutes{10});
  ConnectivityPolicy policy;

  // 10 + 10 + 10 = 30 minutes: the third ack lands exactly on the boundary.
  const auto outcome = transmit_pending(buffer, policy, kStart, sink);
  CHECK(outcome.sent == 3);
  CHECK(outcome.remaining == 2);
  CHECK(outcome.session_elapsed == minutes{30});
}

TEST_CASE("no transmission is attempted during an outage") {
  ForwardBuffer buffer(10);
  buffer.push(make_record(0));
  ScriptedSink sink(seconds{1});
  ConnectivityPolicy policy;
  policy.outages = {{kStart, kStart + hours{2}}};

  const auto outcome = transmit_pending(buffer, policy, kStart + hours{1}, sink);
  CHECK(outcome.sent == 0);
  CHECK(outcome.remaining == 1);
  CHECK(sink.attempts() == 0);

  // Outage end is exclusive: transmission resumes at the boundary instant.
  const auto after = transmit_pending(buffer, policy, kStart + hours{2}, sink);
  CHECK(after.sent == 1);
}

TEST_CASE("a refusing sink ends the session with records intact") {
  ForwardBuffer buffer(10);
  for (int i = 0; i < 4; ++i) buffer.push(make_record(i));
  ScriptedSink sink(seconds{1});
  sink.refuse_every(3);  // third attempt fails
  ConnectivityPolicy policy;

  const auto outcome = transmit_pending(buffer, policy, kStart, sink);
  CHECK(outcome.sent == 2);
  CHECK(outcome.remaining == 2);
  CHECK(buffer.front() == make_record(2));  // head survives for the next session
}

namespace {

/// Synthetic channels for agent runs: constant truth, no noise.
struct AgentFixture {
  TruthSignalParams truth;
  SensorModel model;
  std::vector<std::unique_ptr<SyntheticSensor>> sensors;
  std::vector<AgentChannelSpec> specs;

  explicit AgentFixture(const std::vector<std::pair<std::string, PollutantKind>>& channels) {
    truth.baseline_ugm3 = 10.0;
    for (const auto& [station, pollutant] : channels) {
      sensors.push_back(
          std::make_unique<SyntheticSensor>(station, pollutant, truth, model, kStart));
      specs.push_back({station, pollutant, sensors.back().get()});
    }
  }
};

}  // namespace

TEST_CASE("agent produces one record per channel per hour and drains them all") {
  AgentFixture fx({{"lcs-01", PollutantKind::pm2_5}, {"lcs-01", PollutantKind::no2}});
  ScriptedSink sink(milliseconds{1});
  SimulatedClock clock(kStart);
  AgentOptions options;

  const auto summary = run_agent(fx.specs, sink, clock, kStart, 48, options);
  CHECK(summary.produced == 96);
  CHECK(summary.sent == 96);
  CHECK(summary.remaining == 0);
  CHECK(summary.dropped == 0);
  REQUIRE(summary.channels.size() == 2);
  for (const auto& ch : summary.channels) {
    CHECK(ch.raw_samples == 480);
    CHECK(ch.hourly_records == 48);
    CHECK(ch.missing_hours == 0);
    CHECK(ch.dropped_records == 0);
    CHECK_FALSE(ch.exhausted);
  }
  CHECK(summary.produced == summary.sent + summary.remaining + summary.dropped);
  // The simulated clock advanced through the whole span.
  CHECK(clock.now() == kStart + hours{48});
}

TEST_CASE("acked sequence is a prefix-merge of per-channel enqueue orders") {
  AgentFixture fx({{"lcs-01", PollutantKind::pm2_5},
                   {"lcs-01", PollutantKind::pm10},
                   {"lcs-01", PollutantKind::no2}});
  ScriptedSink sink(milliseconds{1});
  SimulatedClock clock(kStart);

  const auto summary = run_agent(fx.specs, sink, clock, kStart, 12, AgentOptions{});
  CHECK(summary.sent == 36);

  // Within each channel the acked hours must be strictly increasing, with no
  // hour skipped before a later one arrives — FIFO per channel.
  for (const auto& spec : fx.specs) {
    std::vector<UtcSeconds> hours_seen;
    for (const auto& rec : sink.delivered()) {
      if (rec.pollutant == spec.pollutant) hours_seen.push_back(rec.bucket_start);
    }
    REQUIRE(hours_seen.size() == 12);
    for (std::size_t i = 0; i < hours_seen.size(); ++i) {
      REQUIRE(hours_seen[i] == kStart + hours{static_cast<int>(i)});
    }
  }
}

TEST_CASE("an exhausted backend leaves MISSING hours, not gaps") {
  // Replay just 90 minutes of samples into a 4-hour run.
  const auto dir = std::filesystem::temp_directory_path() / "aqmon_test_exhaust";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto csv = dir / "raw.csv";
  {
    RawCsvWriter writer(csv);
    for (int i = 0; i < 15; ++i) {
      writer.append({"lcs-01", PollutantKind::pm10, kStart + minutes{6 * i}, 10.0});
    }
    writer.flush();
  }
  ReplaySensor replay(csv, "lcs-01", PollutantKind::pm10);
  std::vector<AgentChannelSpec> specs{{"lcs-01", PollutantKind::pm10, &replay}};
  ScriptedSink sink(milliseconds{1});
  SimulatedClock clock(kStart);

  const auto summary = run_agent(specs, sink, clock, kStart, 4, AgentOptions{});
  REQUIRE(summary.channels.size() == 1);
  const auto& ch = summary.channels[0];
  CHECK(ch.exhausted);
  CHECK(ch.raw_samples == 15);
  CHECK(ch.hourly_records == 4);      // every hour still closed
  CHECK(ch.missing_hours == 2);       // hour 1 got 5 samples (>= min), hours 2-3 got none
  CHECK(summary.produced == 4);
  CHECK(summary.sent == 4);           // MISSING records still travel

  int missing_count = 0;
  for (const auto& rec : sink.delivered()) {
    if (rec.missing()) ++missing_count;
  }
  CHECK(missing_count == 2);
}

TEST_CASE("drops are attributed to the channel that lost its record") {
  AgentFixture fx({{"lcs-01", PollutantKind::pm2_5}, {"lcs-01", PollutantKind::no2}});
  ScriptedSink sink(seconds{1});
  sink.refuse_every(1);  // sink never acknowledges
  SimulatedClock clock(kStart);
  AgentOptions options;
  options.buffer_capacity = 3;

  const auto summary = run_agent(fx.specs, sink, clock, kStart, 10, options);
  CHECK(summary.produced == 20);
  CHECK(summary.sent == 0);
  CHECK(summary.remaining == 3);
  CHECK(summary.dropped == 17);
  CHECK(summary.produced == summary.sent + summary.remaining + summary.dropped);

  std::uint64_t attributed = 0;
  for (const auto& ch : summary.channels) attributed += ch.dropped_records;
  CHECK(attributed == summary.dropped);
  // Eviction alternates pm2_5/no2 as hours close, so both channels lost some.
  CHECK(summary.channels[0].dropped_records >= 8);
  CHECK(summary.channels[1].dropped_records >= 8);
}

TEST_CASE("conservation holds under a flaky sink") {
  AgentFixture fx({{"lcs-01", PollutantKind::pm2_5},
                   {"lcs-01", PollutantKind::pm10},
                   {"lcs-01", PollutantKind::no2}});

  class FlakySink : public RecordSink {
   public:
    explicit FlakySink(std::uint64_t seed) : rng_(seed) {}
    std::optional<milliseconds> deliver(const HourlyRecord&) override {
      if (std::uniform_real_distribution<>(0.0, 1.0)(rng_) < 0.4) return std::nullopt;
      return milliseconds{200};
    }

   private:
    std::mt19937_64 rng_;
  };

  FlakySink sink(2024);
  SimulatedClock clock(kStart);
  AgentOptions options;
  options.buffer_capacity = 5;  // force drops

  const auto summary = run_agent(fx.specs, sink, clock, kStart, 72, options);
  CHECK(summary.produced == 216);
  CHECK(summary.produced == summary.sent + summary.remaining + summary.dropped);
  std::uint64_t attributed = 0;
  for (const auto& ch : summary.channels) attributed += ch.dropped_records;
  CHECK(attributed == summary.dropped);
}

TEST_CASE("hourly transmission honours outages until they end") {
  AgentFixture fx({{"lcs-01", PollutantKind::pm2_5}});
  ScriptedSink sink(milliseconds{1});
  SimulatedClock clock(kStart);
  AgentOptions options;
  options.policy.outages = {{kStart, kStart + hours{6}}};

  const auto summary = run_agent(fx.specs, sink, clock, kStart, 12, options);
  CHECK(summary.produced == 12);
  CHECK(summary.sent == 12);  // everything caught up after the outage
  CHECK(summary.remaining == 0);
  // The first session only opened once the outage had ended.
  REQUIRE_FALSE(summary.session_trace.empty());
  CHECK(summary.session_trace.front().opened_at >= kStart + hours{6});
  // Sessions during hours 1..5 never opened, so the backlog went in one go.
  CHECK(summary.session_trace.front().sent == 6);
}

TEST_CASE("session trace respects the record ceiling under a slow sink") {
  AgentFixture fx({{"lcs-01", PollutantKind::pm2_5},
                   {"lcs-01", PollutantKind::pm10},
                   {"lcs-01", PollutantKind::no2}});
  ScriptedSink sink(minutes{1});
  SimulatedClock clock(kStart);
  AgentOptions options;
  // 20 offline hours pile up a 60-record backlog, forcing multi-session drains.
  options.policy.outages = {{kStart, kStart + hours{20}}};

  const auto summary = run_agent(fx.specs, sink, clock, kStart, 24, options);
  CHECK(summary.produced == 72);
  CHECK(summary.sent == 72);  // back-to-back sessions clear the backlog
  CHECK(summary.max_session_records == 30);  // the ceiling was actually reached
  CHECK(summary.longest_session == minutes{30});
  for (const auto& s : summary.session_trace) {
    REQUIRE(s.sent <= 30);
    REQUIRE(s.elapsed <= minutes{30});
  }
}

TEST_CASE("agent spools raw and hourly trails that replay cleanly") {
  const auto dir = std::filesystem::temp_directory_path() / "aqmon_test_spool";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  AgentFixture fx({{"lcs-01", PollutantKind::pm2_5}});
  ScriptedSink sink(milliseconds{1});
  SimulatedClock clock(kStart);
  AgentOptions options;
  options.raw_spool = dir / "raw.csv";
  options.hourly_spool = dir / "hourly.csv";

  const auto summary = run_agent(fx.specs, sink, clock, kStart, 6, options);
  CHECK(summary.produced == 6);

  RawCsvReader raw(dir / "raw.csv");
  std::size_t raw_rows = 0;
  while (raw.next()) ++raw_rows;
  CHECK(raw_rows == 60);

  const auto hourly = read_hourly_csv(dir / "hourly.csv");
  REQUIRE(hourly.size() == 6);
  for (const auto& rec : hourly) {
    CHECK(rec.n_samples == 10);
    CHECK_FALSE(rec.missing());
  }
  // The spool holds exactly what the sink received.
  for (std::size_t i = 0; i < hourly.size(); ++i) {
    const auto& sent = sink.delivered()[i];
    // Spool means went through shortest-double text; they parse back equal.
    CHECK(hourly[i].bucket_start == sent.bucket_start);
    CHECK(hourly[i].mean_ugm3 == sent.mean_ugm3);
  }
}

TEST_CASE("agent rejects invalid setups up front") {
  AgentFixture fx({{"lcs-01", PollutantKind::pm2_5}});
  ScriptedSink sink(milliseconds{1});
  SimulatedClock clock(kStart);

  CHECK_THROWS_AS(run_agent({}, sink, clock, kStart, 1, AgentOptions{}), Error);
  CHECK_THROWS_AS(run_agent(fx.specs, sink, clock, kStart + seconds{30}, 1, AgentOptions{}),
                  Error);
  CHECK_THROWS_AS(run_agent(fx.specs, sink, clock, kStart, 0, AgentOptions{}), Error);

  std::vector<AgentChannelSpec> null_backend{{"lcs-01", PollutantKind::pm2_5, nullptr}};
  CHECK_THROWS_AS(run_agent(null_backend, sink, clock, kStart, 1, AgentOptions{}), Error);
}
