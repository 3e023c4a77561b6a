#include <catch2/catch_amalgamated.hpp>

#include <sys/socket.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "aqmon/net.hpp"
#include "aqmon/server.hpp"
#include "aqmon/store.hpp"
#include "aqmon/wire.hpp"

using namespace aqmon;
using namespace std::chrono;

namespace {

const UtcSeconds kHour0 = parse_rfc3339("2022-11-01T14:00:00Z");

HourlyRecord make_record(int hour_index,
                         const std::string& station = "ncc-01",
                         PollutantKind pollutant = PollutantKind::no2) {
  return {station, pollutant, kHour0 + hours{hour_index}, 41.2 + hour_index, 10};
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("aqmon_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

WireErrorCode error_of(const std::string& line) {
  const auto parsed = parse_wire_record(line);
  REQUIRE(std::holds_alternative<WireError>(parsed));
  return std::get<WireError>(parsed).code;
}

/// Raw client speaking the line protocol directly, for exercising the server
/// below the SocketSink abstraction.
struct RawClient {
  Socket conn;
  LineReader reader;

  explicit RawClient(std::uint16_t port)
      : conn(tcp_connect({"127.0.0.1", port})), reader(conn.fd()) {}

  std::string exchange(const std::string& line) {
    REQUIRE(send_all(conn.fd(), line + "\n"));
    const auto response = reader.next_line();
    REQUIRE(response.has_value());
    return *response;
  }
};

}  // namespace

TEST_CASE("wire records serialize with fixed key order and round trip") {
  const HourlyRecord rec = make_record(0);
  const std::string line = serialize_record(rec);
  CHECK(line ==
        R"({"v":1,"station":"ncc-01","pollutant":"no2","hour":"2022-11-01T14:00:00Z","mean":41.2,"n":10})");

  const auto parsed = parse_wire_record(line);
  REQUIRE(std::holds_alternative<WireRecord>(parsed));
  CHECK(to_hourly(std::get<WireRecord>(parsed)) == rec);

  // MISSING hours carry an explicit null mean.
  const HourlyRecord missing{"ncc-01", PollutantKind::pm10, kHour0, std::nullopt, 2};
  const std::string missing_line = serialize_record(missing);
  CHECK(missing_line ==
        R"({"v":1,"station":"ncc-01","pollutant":"pm10","hour":"2022-11-01T14:00:00Z","mean":null,"n":2})");
  const auto reparsed = parse_wire_record(missing_line);
  REQUIRE(std::holds_alternative<WireRecord>(reparsed));
  CHECK(to_hourly(std::get<WireRecord>(reparsed)) == missing);

  // Serialization is a pure function of the record.
  CHECK(serialize_record(rec) == line);
}

TEST_CASE("wire parser rejects each malformation with its own code") {
  const auto ok = [](const std::string& line) {
    return std::holds_alternative<WireRecord>(parse_wire_record(line));
  };

  CHECK(error_of("not json at all") == WireErrorCode::syntax);
  CHECK(error_of("[1,2,3]") == WireErrorCode::syntax);
  CHECK(error_of("{}") == WireErrorCode::syntax);  // missing keys
  CHECK(error_of(
            R"({"v":1,"station":"s","pollutant":"no2","hour":"2022-11-01T14:00:00Z","mean":1,"n":1,"extra":0})") ==
        WireErrorCode::syntax);
  CHECK(error_of(
            R"({"v":"1","station":"s","pollutant":"no2","hour":"2022-11-01T14:00:00Z","mean":1,"n":1})") ==
        WireErrorCode::syntax);
  CHECK(error_of(
            R"({"v":2,"station":"s","pollutant":"no2","hour":"2022-11-01T14:00:00Z","mean":1,"n":1})") ==
        WireErrorCode::version);
  CHECK(error_of(
            R"({"v":1,"station":"bad station","pollutant":"no2","hour":"2022-11-01T14:00:00Z","mean":1,"n":1})") ==
        WireErrorCode::station);
  CHECK(error_of(
            R"({"v":1,"station":"s","pollutant":"o3","hour":"2022-11-01T14:00:00Z","mean":1,"n":1})") ==
        WireErrorCode::pollutant);
  CHECK(error_of(
            R"({"v":1,"station":"s","pollutant":"no2","hour":"today","mean":1,"n":1})") ==
        WireErrorCode::timestamp);
  CHECK(error_of(
            R"({"v":1,"station":"s","pollutant":"no2","hour":"2022-11-01T14:30:00Z","mean":1,"n":1})") ==
        WireErrorCode::alignment);
  CHECK(error_of(
            R"({"v":1,"station":"s","pollutant":"no2","hour":"2022-11-01T14:00:00Z","mean":1,"n":1.5})") ==
        WireErrorCode::n_samples);
  CHECK(error_of(
            R"({"v":1,"station":"s","pollutant":"no2","hour":"2022-11-01T14:00:00Z","mean":1,"n":-1})") ==
        WireErrorCode::n_samples);
  CHECK(error_of(
            R"({"v":1,"station":"s","pollutant":"no2","hour":"2022-11-01T14:00:00Z","mean":"x","n":1})") ==
        WireErrorCode::value);

  // The happy path with a null mean and n = 0 is valid.
  CHECK(ok(R"({"v":1,"station":"s","pollutant":"no2","hour":"2022-11-01T14:00:00Z","mean":null,"n":0})"));
  // Key order on input is free; only output order is pinned.
  CHECK(ok(R"({"n":1,"mean":1,"hour":"2022-11-01T14:00:00Z","pollutant":"no2","station":"s","v":1})"));
}

TEST_CASE("store accepts first writes, flags duplicates, and serves ranges") {
  const auto dir = fresh_dir("store_basic");
  Store store(dir);

  CHECK(store.ingest(make_record(0)) == IngestStatus::accepted);
  CHECK(store.ingest(make_record(1)) == IngestStatus::accepted);
  CHECK(store.ingest(make_record(0)) == IngestStatus::duplicate);  // exact retransmit
  // Same key with different payload is still a duplicate: first write wins.
  HourlyRecord conflicting = make_record(1);
  conflicting.mean_ugm3 = 999.0;
  CHECK(store.ingest(conflicting) == IngestStatus::duplicate);
  CHECK(store.size() == 2);

  store.ingest(make_record(5));
  const auto range = store.query_range("ncc-01", PollutantKind::no2, kHour0, kHour0 + hours{2});
  REQUIRE(range.size() == 2);
  CHECK(range[0] == make_record(0));
  CHECK(range[1] == make_record(1));
  CHECK_THROWS_AS(store.query_range("ncc-01", PollutantKind::no2, kHour0, kHour0), Error);
  CHECK_THROWS_AS(
      store.query_range("ncc-01", PollutantKind::no2, kHour0 + seconds{1}, kHour0 + hours{1}),
      Error);

  const auto span = store.channel_span("ncc-01", PollutantKind::no2);
  REQUIRE(span.has_value());
  CHECK(span->first == kHour0);
  CHECK(span->second == kHour0 + hours{5});
  CHECK_FALSE(store.channel_span("ncc-01", PollutantKind::pm2_5).has_value());

  CHECK(store.stations() == std::vector<std::string>{"ncc-01"});
  CHECK(store.pollutants("ncc-01") == std::vector<PollutantKind>{PollutantKind::no2});

  CHECK_THROWS_AS(store.ingest({"a/b", PollutantKind::no2, kHour0, 1.0, 1}), Error);
  CHECK_THROWS_AS(
      store.ingest({"ncc-01", PollutantKind::no2, kHour0 + minutes{30}, 1.0, 1}), Error);
}

TEST_CASE("store survives reopen: the log is the database") {
  const auto dir = fresh_dir("store_reopen");
  {
    Store store(dir);
    store.ingest(make_record(0));
    store.ingest(make_record(1, "ncc-01", PollutantKind::pm2_5));
    store.ingest(make_record(2, "other-st", PollutantKind::no2));
  }

  // Log layout on disk: <data_dir>/<station>/<pollutant>.log
  CHECK(std::filesystem::exists(dir / "ncc-01" / "no2.log"));
  CHECK(std::filesystem::exists(dir / "ncc-01" / "pm2_5.log"));
  CHECK(std::filesystem::exists(dir / "other-st" / "no2.log"));

  Store reopened(dir);
  CHECK(reopened.size() == 3);
  CHECK(reopened.discarded_partial_lines() == 0);
  CHECK(reopened.ingest(make_record(0)) == IngestStatus::duplicate);  // index rebuilt
  const auto records = reopened.channel_records("ncc-01", PollutantKind::no2);
  REQUIRE(records.size() == 1);
  CHECK(records[0] == make_record(0));
  CHECK(reopened.stations() == std::vector<std::string>{"ncc-01", "other-st"});
}

TEST_CASE("a torn trailing line is discarded and counted on replay") {
  const auto dir = fresh_dir("store_torn");
  {
    Store store(dir);
    store.ingest(make_record(0));
    store.ingest(make_record(1));
  }
  {
    // Simulate a crash mid-append: a final line without its newline.
    std::ofstream log(dir / "ncc-01" / "no2.log", std::ios::app | std::ios::binary);
    log << R"({"v":1,"station":"ncc-01","pollutant":"no2","hour":"2022-1)";
  }

  Store reopened(dir);
  CHECK(reopened.size() == 2);
  CHECK(reopened.discarded_partial_lines() == 1);
  // The torn record's hour is simply absent, ready to be retransmitted.
  CHECK(reopened.ingest(make_record(2)) == IngestStatus::accepted);
}

TEST_CASE("corruption before the tail fails replay loudly") {
  const auto dir = fresh_dir("store_corrupt");
  {
    Store store(dir);
    store.ingest(make_record(0));
  }

  SECTION("garbage line in the middle") {
    std::ofstream log(dir / "ncc-01" / "no2.log", std::ios::app | std::ios::binary);
    log << "garbage\n";
    log << serialize_record(make_record(1)) << "\n";
    log.close();
    try {
      Store reopened(dir);
      FAIL("corrupted log must not replay");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::data_integrity);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  SECTION("record filed under the wrong channel") {
    std::ofstream log(dir / "ncc-01" / "no2.log", std::ios::app | std::ios::binary);
    log << serialize_record(make_record(1, "ncc-01", PollutantKind::pm10)) << "\n";
    log.close();
    CHECK_THROWS_AS(Store{dir}, Error);
  }

  SECTION("duplicate key inside one log") {
    std::ofstream log(dir / "ncc-01" / "no2.log", std::ios::app | std::ios::binary);
    log << serialize_record(make_record(0)) << "\n";
    log.close();
    CHECK_THROWS_AS(Store{dir}, Error);
  }
}

TEST_CASE("store sink acknowledges accepted and duplicate alike") {
  const auto dir = fresh_dir("store_sink");
  Store store(dir);
  StoreSink sink(store, milliseconds{7});

  CHECK(sink.deliver(make_record(0)) == milliseconds{7});
  CHECK(sink.deliver(make_record(0)) == milliseconds{7});  // duplicate still acks
  CHECK(store.size() == 1);
}

TEST_CASE("address parsing handles hostnames, v6 brackets, and junk") {
  const auto a = parse_address("127.0.0.1:9100");
  CHECK(a.host == "127.0.0.1");
  CHECK(a.port == 9100);
  const auto b = parse_address("[::1]:80");
  CHECK(b.host == "::1");
  CHECK(b.port == 80);
  const auto c = parse_address("localhost:0");
  CHECK(c.port == 0);

  CHECK_THROWS_AS(parse_address("no-port"), Error);
  CHECK_THROWS_AS(parse_address(":123"), Error);
  CHECK_THROWS_AS(parse_address("host:"), Error);
  CHECK_THROWS_AS(parse_address("host:99999"), Error);
  CHECK_THROWS_AS(parse_address("host:12x"), Error);
}

TEST_CASE("ingest service accepts, deduplicates, and rejects over loopback") {
  const auto dir = fresh_dir("server_basic");
  Store store(dir);
  IngestServer server(store, {"127.0.0.1", 0});
  server.start();
  REQUIRE(server.port() != 0);

  RawClient client(server.port());
  CHECK(client.exchange(serialize_record(make_record(0))) == "ok");
  CHECK(client.exchange(serialize_record(make_record(1))) == "ok");
  CHECK(client.exchange(serialize_record(make_record(0))) == "dup");
  CHECK(client.exchange("this is not json") == "err:syntax");
  CHECK(client.exchange(
            R"({"v":9,"station":"s","pollutant":"no2","hour":"2022-11-01T14:00:00Z","mean":1,"n":1})") ==
        "err:version");
  CHECK(client.exchange(
            R"({"v":1,"station":"s","pollutant":"no2","hour":"2022-11-01T14:30:00Z","mean":1,"n":1})") ==
        "err:alignment");
  // The connection survives rejected lines.
  CHECK(client.exchange(serialize_record(make_record(2))) == "ok");

  server.stop();
  CHECK(store.size() == 3);
}

TEST_CASE("a connection dropped mid-line leaves no partial ingest") {
  const auto dir = fresh_dir("server_midline");
  Store store(dir);
  IngestServer server(store, {"127.0.0.1", 0});
  server.start();

  {
    Socket conn = tcp_connect({"127.0.0.1", server.port()});
    const std::string line = serialize_record(make_record(0));
    REQUIRE(send_all(conn.fd(), line.substr(0, line.size() / 2)));  // no newline, then vanish
  }
  // A well-behaved client on a fresh connection still works, and the fragment
  // was never ingested.
  RawClient client(server.port());
  CHECK(client.exchange(serialize_record(make_record(1))) == "ok");
  server.stop();
  CHECK(store.size() == 1);
  Store reopened(dir);
  CHECK(reopened.size() == 1);
}

TEST_CASE("concurrent senders all land, duplicates collapse once") {
  const auto dir = fresh_dir("server_concurrent");
  Store store(dir);
  IngestServer server(store, {"127.0.0.1", 0});
  server.start();

  constexpr int kClients = 8;
  constexpr int kRecords = 25;
  std::vector<std::thread> clients;
  for (int c = 0; c < kClients; ++c) {
    clients.emplace_back([&, c] {
      RawClient client(server.port());
      for (int i = 0; i < kRecords; ++i) {
        // Two client threads share each station, so every record arrives twice.
        const auto rec = make_record(i, "station-" + std::to_string(c / 2));
        const auto response = client.exchange(serialize_record(rec));
        REQUIRE((response == "ok" || response == "dup"));
      }
    });
  }
  for (auto& t : clients) t.join();
  server.stop();

  CHECK(store.size() == kClients / 2 * kRecords);
  Store reopened(dir);
  CHECK(reopened.size() == kClients / 2 * kRecords);
}

TEST_CASE("socket sink delivers through a real server and reports costs") {
  const auto dir = fresh_dir("socket_sink");
  Store store(dir);
  IngestServer server(store, {"127.0.0.1", 0});
  server.start();

  SocketSink sink({"127.0.0.1", server.port()});
  const auto cost = sink.deliver(make_record(0));
  REQUIRE(cost.has_value());
  CHECK(*cost >= milliseconds{1});  // measured wall time, ceiling-rounded
  CHECK(sink.last_response() == "ok");
  REQUIRE(sink.deliver(make_record(0)).has_value());  // dup acks too
  CHECK(sink.last_response() == "dup");

  server.stop();
  // With the server gone the sink reports no acknowledgment, not an error.
  CHECK_FALSE(sink.deliver(make_record(1)).has_value());
  CHECK(store.size() == 1);
}

TEST_CASE("socket sink against a dead port neither throws nor acks") {
  // Bind-then-close to find a port with nothing listening.
  std::uint16_t dead_port = 0;
  {
    const auto dir = fresh_dir("dead_port");
    Store store(dir);
    IngestServer probe(store, {"127.0.0.1", 0});
    dead_port = probe.port();
  }
  SocketSink sink({"127.0.0.1", dead_port});
  CHECK_FALSE(sink.deliver(make_record(0)).has_value());
  CHECK(sink.last_response() == "(connect failed)");
}

TEST_CASE("server start/stop is clean and repeatable to stop") {
  const auto dir = fresh_dir("server_lifecycle");
  Store store(dir);
  auto server = std::make_unique<IngestServer>(store, Address{"127.0.0.1", 0});
  server->start();
  CHECK_THROWS_AS(server->start(), Error);  // no double start
  server->stop();
  server->stop();  // idempotent
  CHECK_THROWS_AS(server->start(), Error);  // no restart after stop
  server.reset();  // destructor after explicit stop is fine
}
