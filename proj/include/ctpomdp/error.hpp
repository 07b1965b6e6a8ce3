#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ctpomdp {

enum class ErrorKind {
  config,
  invalid_argument,
  degenerate_observation,
  impossible_jump,
  truncation,
  integrator,
  singular_fisher,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::degenerate_observation: return "degenerate_observation";
    case ErrorKind::impossible_jump: return "impossible_jump";
    case ErrorKind::truncation: return "truncation";
    case ErrorKind::integrator: return "integrator";
    case ErrorKind::singular_fisher: return "singular_fisher";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Library exception. Carries a machine-readable kind and, for errors raised
/// during time integration, the simulation time at which they occurred.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what,
        double time = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), kind_(kind), time_(time) {}

  ErrorKind kind() const noexcept { return kind_; }
  double time() const noexcept { return time_; }
  bool has_time() const noexcept { return !std::isnan(time_); }

 private:
  ErrorKind kind_;
  double time_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace ctpomdp
