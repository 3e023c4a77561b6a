#pragma once

#include <netdb.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <charconv>
#include <chrono>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "aqmon/agent.hpp"
#include "aqmon/error.hpp"
#include "aqmon/wire.hpp"

namespace aqmon {

struct Address {
  std::string host;
  std::uint16_t port = 0;
};

/// Parses `host:port` ("127.0.0.1:4410", "[::1]:4410", "localhost:0").
/// Port 0 is allowed — the listener treats it as "pick a free port".
inline Address parse_address(std::string_view text) {
  const std::size_t colon = text.rfind(':');
  require(colon != std::string_view::npos && colon > 0 && colon + 1 < text.size(),
          ErrorCode::config, "address must be host:port, got '" + std::string(text) + "'");
  std::string host(text.substr(0, colon));
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') {
    host = host.substr(1, host.size() - 2);
  }
  const std::string_view port_text = text.substr(colon + 1);
  unsigned port{};
  const auto res = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  require(res.ec == std::errc{} && res.ptr == port_text.data() + port_text.size() &&
              port <= 65535,
          ErrorCode::config, "bad port in address '" + std::string(text) + "'");
  return Address{std::move(host), static_cast<std::uint16_t>(port)};
}

/// Move-only owner of a socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept {
    if (this != &other) {
      close();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

  /// Unblocks any thread sitting in accept/recv on this descriptor.
  void shutdown_both() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  int fd_ = -1;
};

/// Writes the whole buffer; MSG_NOSIGNAL keeps a dead peer from raising
/// SIGPIPE. Returns false on any send failure.
inline bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n <= 0) return false;
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

/// Incremental reader of newline-terminated lines from a socket. A connection
/// that closes mid-line leaves an unterminated fragment, which is discarded.
class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}

  /// Next complete line with the trailing '\n' (and optional '\r') stripped;
  /// std::nullopt on EOF or read error.
  std::optional<std::string> next_line() {
    while (true) {
      const std::size_t nl = buffer_.find('\n', scan_from_);
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        buffer_.erase(0, nl + 1);
        scan_from_ = 0;
        return line;
      }
      scan_from_ = buffer_.size();
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n <= 0) return std::nullopt;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buffer_;
  std::size_t scan_from_ = 0;
};

/// Opens a TCP connection, trying each resolved address in turn.
inline Socket tcp_connect(const Address& addr) {
  require(addr.port != 0, ErrorCode::precondition, "cannot connect to port 0");
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* results = nullptr;
  const std::string port = std::to_string(addr.port);
  const int rc = ::getaddrinfo(addr.host.c_str(), port.c_str(), &hints, &results);
  require(rc == 0 && results != nullptr, ErrorCode::io,
          "cannot resolve '" + addr.host + "': " + ::gai_strerror(rc));

  Socket sock;
  for (const addrinfo* ai = results; ai != nullptr; ai = ai->ai_next) {
    Socket candidate(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!candidate.valid()) continue;
    if (::connect(candidate.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
      sock = std::move(candidate);
      break;
    }
  }
  ::freeaddrinfo(results);
  require(sock.valid(), ErrorCode::io,
          "cannot connect to " + addr.host + ":" + std::to_string(addr.port));
  return sock;
}

/// Sink that ships records to a remote ingestion service over the wire
/// protocol. Reconnects lazily after a failure. A delivery is acknowledged
/// only by an `ok` or `dup` response line; anything else — connection
/// failure, EOF, or an `err:<code>` rejection — yields no acknowledgment, so
/// the agent keeps the record queued (the response text is kept for
/// diagnosis). The reported session cost is the measured wall time of the
/// exchange, rounded up to a millisecond.
class SocketSink : public RecordSink {
 public:
  explicit SocketSink(Address addr) : addr_(std::move(addr)) {}

  std::optional<std::chrono::milliseconds> deliver(const HourlyRecord& rec) override {
    const auto started = std::chrono::steady_clock::now();
    if (!conn_.valid()) {
      try {
        conn_ = tcp_connect(addr_);
        reader_.emplace(conn_.fd());
      } catch (const Error&) {
        conn_.close();
        last_response_ = "(connect failed)";
        return std::nullopt;
      }
    }
    const std::string line = serialize_record(rec) + '\n';
    if (!send_all(conn_.fd(), line)) {
      drop_connection("(send failed)");
      return std::nullopt;
    }
    const auto response = reader_->next_line();
    if (!response) {
      drop_connection("(connection closed)");
      return std::nullopt;
    }
    last_response_ = *response;
    if (*response != "ok" && *response != "dup") return std::nullopt;
    const auto elapsed = std::chrono::steady_clock::now() - started;
    return std::chrono::ceil<std::chrono::milliseconds>(elapsed);
  }

  /// Last response line received (or a parenthesized transport note).
  const std::string& last_response() const { return last_response_; }

 private:
  void drop_connection(std::string note) {
    conn_.close();
    reader_.reset();
    last_response_ = std::move(note);
  }

  Address addr_;
  Socket conn_;
  std::optional<LineReader> reader_;
  std::string last_response_;
};

}  // namespace aqmon
