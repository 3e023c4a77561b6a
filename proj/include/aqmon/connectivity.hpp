#pragma once

#include <chrono>
#include <vector>

#include "aqmon/error.hpp"
#include "aqmon/time.hpp"

namespace aqmon {

/// Half-open interval [begin, end) during which the uplink is unavailable.
struct OutageWindow {
  UtcSeconds begin;
  UtcSeconds end;
};

/// Uplink behaviour model. The gateway drops any connection after
/// `session_max` of continuous use, so the agent never starts a send it
/// cannot finish inside the current session; it reconnects after
/// `reconnect_delay` and resumes from where the buffer left off.
struct ConnectivityPolicy {
  std::chrono::milliseconds session_max{std::chrono::minutes{30}};
  std::chrono::milliseconds reconnect_delay{std::chrono::seconds{5}};
  std::vector<OutageWindow> outages;

  bool in_outage(UtcSeconds t) const {
    for (const auto& w : outages) {
      if (t >= w.begin && t < w.end) return true;
    }
    return false;
  }
};

inline void validate(const ConnectivityPolicy& p) {
  require(p.session_max > std::chrono::milliseconds{0}, ErrorCode::precondition,
          "session_max must be positive");
  require(p.reconnect_delay >= std::chrono::milliseconds{0}, ErrorCode::precondition,
          "reconnect_delay must be non-negative");
  for (const auto& w : p.outages) {
    require(w.begin < w.end, ErrorCode::precondition, "outage window must be non-empty");
  }
}

}  // namespace aqmon
