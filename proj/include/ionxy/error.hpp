#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ionxy {

/// Failure classes raised by the library. Each maps onto one CLI exit code.
enum class ErrorKind {
  ParseError,
  UnknownKey,
  ValidationError,
  ResonantTone,
  DegenerateTones,
  ZigZagUnstable,
  NoConvergence,
  ZeroCoupling,
  ZeroMatrix,
  TargetUnreachable,
  DimensionMismatch,
  DimensionCap,
  StepFailure,
  LeakageExceeded,
  MissingStates,
  UnsupportedDrive,
  FitDiverged,
  InvalidEdgeFraction,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// 0 ok, 2 parse, 3 validation, 4 numerical, 5 resource cap.
int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, std::string operation, std::string message,
        std::string parameter = {})
      : std::runtime_error(std::move(message)),
        kind_(kind),
        module_(std::move(module)),
        operation_(std::move(operation)),
        parameter_(std::move(parameter)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& operation() const noexcept { return operation_; }
  const std::string& parameter() const noexcept { return parameter_; }

  /// Re-tags the offending parameter path, e.g. when the CLI knows which scenario key fed the call.
  Error with_parameter(std::string path) const {
    Error e = *this;
    e.parameter_ = std::move(path);
    return e;
  }

 private:
  ErrorKind kind_;
  std::string module_;
  std::string operation_;
  std::string parameter_;
};

}  // namespace ionxy
