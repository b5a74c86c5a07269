#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace qbattery {

// Rejected inputs throw std::invalid_argument. The two types below cover what
// is left: configuration problems found by the front-end and numerical
// failures detected while running (integrator drift, optimizer breakdown).

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Short human-readable number for diagnostics (std::to_string uses %f,
/// which prints nanosecond steps as 0.000000).
inline std::string fmt_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace qbattery
