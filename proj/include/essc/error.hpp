#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace essc {

enum class ErrorKind {
  MalformedHeader,
  TruncatedData,
  RangeOverflow,
  InvalidSpec,
  UnknownLabel,
  EmptyInput,
  FrequencyOutOfRange,
  SampleRateMismatch,
  TooShort,
  MissingLabels,
  EmptyClass,
  NonFinite,
  InvalidLatentDim,
  DimensionMismatch,
  ShapeMismatch,
  IndexOutOfRange,
  NoForwardCache,
  NonFiniteGradient,
  TooFewItems,
  EmptyDataset,
  BadMagic,
  ChecksumMismatch,
  VersionUnsupported,
  IoError,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a stable kind so callers (and
/// the CLI's stderr prefix) can dispatch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace essc
