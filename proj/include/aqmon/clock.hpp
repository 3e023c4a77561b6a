#pragma once

#include <chrono>
#include <thread>

#include "aqmon/error.hpp"
#include "aqmon/time.hpp"

namespace aqmon {

/// Time source for the agent loop. The simulated clock makes a 34-week
/// deployment run in milliseconds and keeps runs reproducible; the system
/// clock drives real deployments.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual UtcSeconds now() const = 0;
  /// Blocks (or logically advances) until `t`; returns immediately if `t` is
  /// not in the future.
  virtual void wait_until(UtcSeconds t) = 0;
};

/// Virtual time: `wait_until` jumps straight to the target instant.
class SimulatedClock final : public Clock {
 public:
  explicit SimulatedClock(UtcSeconds start) : now_(start) {}

  UtcSeconds now() const override { return now_; }

  void wait_until(UtcSeconds t) override {
    if (t > now_) now_ = t;
  }

  /// Direct advance for tests.
  void advance(std::chrono::seconds d) {
    require(d >= std::chrono::seconds{0}, ErrorCode::precondition, "cannot advance backwards");
    now_ += d;
  }

 private:
  UtcSeconds now_;
};

/// Wall-clock time, truncated to whole seconds.
class SystemClock final : public Clock {
 public:
  UtcSeconds now() const override {
    return std::chrono::time_point_cast<std::chrono::seconds>(
        std::chrono::system_clock::now());
  }

  void wait_until(UtcSeconds t) override { std::this_thread::sleep_until(t); }
};

}  // namespace aqmon
