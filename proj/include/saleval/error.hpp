#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace saleval {

enum class ErrorKind {
  BadMagic,
  TruncatedFile,
  LabelOutOfRange,
  InsufficientClassMembers,
  ShapeMismatch,
  TapeConsumed,
  NonFinite,
  DivergedTraining,
  UnsupportedLayer,
  SingularRegression,
  TooFewSamples,
  NotSymmetric,
  IndefiniteMatrix,
  DimensionMismatch,
  CurveTooShort,
  InvalidArgument,
  NoMethodsConfigured,
  ConfigError,
  IoError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::InsufficientClassMembers: return "InsufficientClassMembers";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::TapeConsumed: return "TapeConsumed";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::DivergedTraining: return "DivergedTraining";
    case ErrorKind::UnsupportedLayer: return "UnsupportedLayer";
    case ErrorKind::SingularRegression: return "SingularRegression";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::IndefiniteMatrix: return "IndefiniteMatrix";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::CurveTooShort: return "CurveTooShort";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NoMethodsConfigured: return "NoMethodsConfigured";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace saleval
