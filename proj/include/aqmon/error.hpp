#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aqmon {

enum class ErrorCode {
  precondition,           // caller violated a stated operation precondition
  parse,                  // malformed input data (CSV row, timestamp, token)
  io,                     // filesystem or socket failure
  config,                 // bad or inconsistent configuration
  data_integrity,         // inputs are internally inconsistent (e.g. duplicate hours)
  insufficient_data,      // too few pairs for a statistic
  undefined_correlation,  // zero variance on one side
  degenerate_fit,         // zero candidate variance in the calibration fit
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
    case ErrorCode::config: return "config";
    case ErrorCode::data_integrity: return "data_integrity";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::undefined_correlation: return "undefined_correlation";
    case ErrorCode::degenerate_fit: return "degenerate_fit";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) raise(code, message);
}

}  // namespace aqmon
