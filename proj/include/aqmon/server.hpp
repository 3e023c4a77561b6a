#pragma once

#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>

#include <atomic>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "aqmon/net.hpp"
#include "aqmon/store.hpp"

namespace aqmon {

/// Line-oriented ingestion endpoint: accepts TCP connections, reads one JSON
/// record per line, and answers each line with `ok` (stored), `dup` (key
/// already present), or `err:<code>` (rejected). The acknowledgment is sent
/// only after the store's durable append, and a storage failure closes the
/// connection unanswered so the sender retries. One thread per connection;
/// the shared Store serializes appends internally.
class IngestServer {
 public:
  /// Binds and listens immediately (so the port is known), but accepts no
  /// connections until start(). Port 0 picks a free port; port() tells which.
  IngestServer(Store& store, const Address& addr) : store_(store) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* results = nullptr;
    const std::string port = std::to_string(addr.port);
    const int rc = ::getaddrinfo(addr.host.empty() ? nullptr : addr.host.c_str(), port.c_str(),
                                 &hints, &results);
    require(rc == 0 && results != nullptr, ErrorCode::io,
            "cannot resolve listen address '" + addr.host + "': " + ::gai_strerror(rc));

    for (const addrinfo* ai = results; ai != nullptr; ai = ai->ai_next) {
      Socket candidate(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
      if (!candidate.valid()) continue;
      const int one = 1;
      ::setsockopt(candidate.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
      if (::bind(candidate.fd(), ai->ai_addr, ai->ai_addrlen) == 0 &&
          ::listen(candidate.fd(), 16) == 0) {
        listener_ = std::move(candidate);
        break;
      }
    }
    ::freeaddrinfo(results);
    require(listener_.valid(), ErrorCode::io,
            "cannot listen on " + addr.host + ":" + std::to_string(addr.port));

    sockaddr_storage bound{};
    socklen_t len = sizeof bound;
    require(::getsockname(listener_.fd(), reinterpret_cast<sockaddr*>(&bound), &len) == 0,
            ErrorCode::io, "getsockname failed");
    if (bound.ss_family == AF_INET) {
      port_ = ntohs(reinterpret_cast<const sockaddr_in&>(bound).sin_port);
    } else {
      port_ = ntohs(reinterpret_cast<const sockaddr_in6&>(bound).sin6_port);
    }
  }

  ~IngestServer() { stop(); }

  IngestServer(const IngestServer&) = delete;
  IngestServer& operator=(const IngestServer&) = delete;

  std::uint16_t port() const { return port_; }

  void start() {
    require(!accept_thread_.joinable(), ErrorCode::precondition, "server already started");
    require(listener_.valid(), ErrorCode::precondition, "server already stopped");
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  /// Stops accepting, unblocks every connection, and joins all threads.
  /// Idempotent.
  void stop() {
    if (!running_.exchange(false)) {
      if (accept_thread_.joinable()) accept_thread_.join();
      return;
    }
    listener_.shutdown_both();
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::thread> workers;
    {
      const std::lock_guard<std::mutex> lock(mutex_);
      for (auto& sock : connections_) sock.shutdown_both();
      workers.swap(workers_);
    }
    for (auto& w : workers) w.join();
    {
      const std::lock_guard<std::mutex> lock(mutex_);
      connections_.clear();
    }
    listener_.close();
  }

 private:
  void accept_loop() {
    while (running_) {
      const int fd = ::accept(listener_.fd(), nullptr, nullptr);
      if (fd < 0) {
        if (!running_) break;
        continue;
      }
      const std::lock_guard<std::mutex> lock(mutex_);
      if (!running_) {
        ::close(fd);
        break;
      }
      connections_.emplace_back(fd);
      workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
  }

  void serve_connection(int fd) {
    LineReader reader(fd);
    while (auto line = reader.next_line()) {
      if (line->empty()) continue;
      std::string response;
      auto parsed = parse_wire_record(*line);
      if (const auto* err = std::get_if<WireError>(&parsed)) {
        response = "err:" + std::string(wire_error_token(err->code));
      } else {
        try {
          const auto status = store_.ingest(to_hourly(std::get<WireRecord>(parsed)));
          response = status == IngestStatus::accepted ? "ok" : "dup";
        } catch (const Error&) {
          break;  // no acknowledgment: close and let the sender retry
        }
      }
      if (!send_all(fd, response + '\n')) break;
    }
    const std::lock_guard<std::mutex> lock(mutex_);
    std::erase_if(connections_, [fd](const Socket& sock) { return sock.fd() == fd; });
  }

  Store& store_;
  Socket listener_;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex mutex_;
  std::vector<Socket> connections_;
  std::vector<std::thread> workers_;
};

}  // namespace aqmon
