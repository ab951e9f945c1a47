#include "ionxy/error.hpp"

namespace ionxy {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownKey: return "UnknownKey";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::ResonantTone: return "ResonantTone";
    case ErrorKind::DegenerateTones: return "DegenerateTones";
    case ErrorKind::ZigZagUnstable: return "ZigZagUnstable";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::ZeroCoupling: return "ZeroCoupling";
    case ErrorKind::ZeroMatrix: return "ZeroMatrix";
    case ErrorKind::TargetUnreachable: return "TargetUnreachable";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DimensionCap: return "DimensionCap";
    case ErrorKind::StepFailure: return "StepFailure";
    case ErrorKind::LeakageExceeded: return "LeakageExceeded";
    case ErrorKind::MissingStates: return "MissingStates";
    case ErrorKind::UnsupportedDrive: return "UnsupportedDrive";
    case ErrorKind::FitDiverged: return "FitDiverged";
    case ErrorKind::InvalidEdgeFraction: return "InvalidEdgeFraction";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ParseError:
      return 2;
    case ErrorKind::UnknownKey:
    case ErrorKind::ValidationError:
    case ErrorKind::ResonantTone:
    case ErrorKind::DegenerateTones:
    case ErrorKind::ZigZagUnstable:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::UnsupportedDrive:
    case ErrorKind::InvalidEdgeFraction:
    case ErrorKind::MissingStates:
      return 3;
    case ErrorKind::NoConvergence:
    case ErrorKind::ZeroCoupling:
    case ErrorKind::ZeroMatrix:
    case ErrorKind::TargetUnreachable:
    case ErrorKind::StepFailure:
    case ErrorKind::LeakageExceeded:
    case ErrorKind::FitDiverged:
    case ErrorKind::IoError:
      return 4;
    case ErrorKind::DimensionCap:
      return 5;
  }
  return 1;
}

}  // namespace ionxy
