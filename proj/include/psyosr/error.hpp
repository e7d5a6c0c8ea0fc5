#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace psyosr {

/// Failure categories surfaced to callers and to the CLI's error JSON.
enum class ErrorKind {
  kStructural,        // malformed input that breaks a structural precondition
  kDegenerateBinning,
  kOutOfRange,
  kShape,
  kDivergence,        // non-finite gradient or loss during training
  kCalibration,
  kSequencing,
  kNotFound,
  kExhausted,
  kGeneration,
  kLookup,
  kParameter,
  kUndefined,         // metric with a zero denominator
  kConfig,
  kManifest,
  kSplit,
  kIo,
  kParse,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace psyosr
