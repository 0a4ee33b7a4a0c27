#pragma once

#include <stdexcept>
#include <string>

namespace intentloop {

/// Broad failure class; the CLI maps these onto exit codes.
enum class ErrorCategory {
  usage,     ///< bad arguments or missing inputs
  data,      ///< malformed or out-of-range data
  pipeline,  ///< a processing stage could not produce a result
};

enum class ErrorKind {
  parameter,
  bounds,
  design,
  detection,
  training,
  empty_training_set,
  empty_condition,
  not_ready,
  protocol,
  actuator,
  io,
  format,
  usage,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept;

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

inline ErrorCategory Error::category() const noexcept {
  switch (kind_) {
    case ErrorKind::usage:
      return ErrorCategory::usage;
    case ErrorKind::parameter:
    case ErrorKind::bounds:
    case ErrorKind::io:
    case ErrorKind::format:
      return ErrorCategory::data;
    default:
      return ErrorCategory::pipeline;
  }
}

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::bounds: return "bounds error";
    case ErrorKind::design: return "design error";
    case ErrorKind::detection: return "detection error";
    case ErrorKind::training: return "training error";
    case ErrorKind::empty_training_set: return "empty training set";
    case ErrorKind::empty_condition: return "empty condition";
    case ErrorKind::not_ready: return "not ready";
    case ErrorKind::protocol: return "protocol error";
    case ErrorKind::actuator: return "actuator error";
    case ErrorKind::io: return "i/o error";
    case ErrorKind::format: return "format error";
    case ErrorKind::usage: return "usage error";
  }
  return "error";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(to_string(kind)) + ": " + what);
}

}  // namespace intentloop
