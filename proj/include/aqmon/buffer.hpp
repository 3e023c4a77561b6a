#pragma once

#include <cstdint>
#include <deque>
#include <optional>

#include "aqmon/error.hpp"
#include "aqmon/hourly.hpp"

namespace aqmon {

/// Bounded FIFO of hourly records awaiting acknowledged delivery. When full,
/// pushing drops the oldest record first (newest data wins) and counts the
/// loss. Records leave the front only on acknowledgement, so anything still
/// queued at a crash or disconnect is retransmitted later — the ingest side
/// deduplicates, which makes retransmission safe.
class ForwardBuffer {
 public:
  explicit ForwardBuffer(std::size_t capacity) : capacity_(capacity) {
    require(capacity >= 1, ErrorCode::precondition, "buffer capacity must be >= 1");
  }

  /// Enqueues a record; when the queue is full, evicts and returns the oldest
  /// record so the caller can attribute the loss.
  std::optional<HourlyRecord> push(HourlyRecord rec) {
    std::optional<HourlyRecord> evicted;
    if (queue_.size() == capacity_) {
      evicted = std::move(queue_.front());
      queue_.pop_front();
      ++dropped_oldest_;
    }
    queue_.push_back(std::move(rec));
    ++pushed_;
    return evicted;
  }

  const HourlyRecord& front() const {
    require(!queue_.empty(), ErrorCode::precondition, "buffer is empty");
    return queue_.front();
  }

  /// Removes the front record after the sink acknowledged it.
  void acknowledge_front() {
    require(!queue_.empty(), ErrorCode::precondition, "buffer is empty");
    queue_.pop_front();
    ++acknowledged_;
  }

  bool empty() const { return queue_.empty(); }
  std::size_t size() const { return queue_.size(); }
  std::size_t capacity() const { return capacity_; }

  std::uint64_t pushed() const { return pushed_; }
  std::uint64_t acknowledged() const { return acknowledged_; }
  std::uint64_t dropped_oldest() const { return dropped_oldest_; }

 private:
  std::size_t capacity_;
  std::deque<HourlyRecord> queue_;
  std::uint64_t pushed_ = 0;
  std::uint64_t acknowledged_ = 0;
  std::uint64_t dropped_oldest_ = 0;
};

}  // namespace aqmon
