#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tmscm {

enum class ErrorCode {
  CycleDetected,
  ShapeMismatch,
  UnknownNode,
  NoSampler,
  NotMonotone,
  NoBracket,
  DimMismatch,
  BadRange,
  DegenerateDistribution,
  NotInvertible,
  OrderMismatch,
  NotScalar,
  ConfigError,
  NonFinite,
  PartialIntervention,
  PrefixViolation,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; the code identifies the failure
// class so callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace tmscm
