#pragma once

#include <stdexcept>
#include <string>

namespace qldp {

enum class ErrorKind {
  InvalidModel,
  Tolerance,
  SimulationDiverged,
  NumericalInstability,
  GridTooSmall,
  InternalConsistency,
  InvalidArgument,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

/// Base exception for every failure the library reports. The kind drives the
/// CLI exit code and the "error" field of the machine-readable error JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace qldp
