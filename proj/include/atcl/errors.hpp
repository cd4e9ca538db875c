#pragma once

#include <stdexcept>
#include <string>

namespace atcl {

/// Invalid task or scenario configuration. The message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure inside the simulated federation (e.g. non-finite loss).
class SimulationFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SignalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TrustError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace atcl
