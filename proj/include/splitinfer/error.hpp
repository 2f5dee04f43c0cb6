#pragma once

#include <stdexcept>
#include <string>

namespace splitinfer {

enum class ErrorCode {
  kShapeMismatch,
  kInvalidSplit,
  kNonFiniteInput,
  kLengthMismatch,
  kCrcMismatch,
  kInflateFailure,
  kCompressionFailure,
  kMalformed,
  kSampleCount,
  kDimensionMismatch,
  kOutOfRange,
  kInvalidParameter,
  kUnknownSplit,
  kInfeasibleFit,
  kEmptyTrace,
  kBadMagic,
  kBadVersion,
  kTruncatedFrame,
  kConnectionRefused,
  kTimeout,
  kBindFailure,
  kProtocol,
  kIo,
  kParse,
  kMissingColumn,
  kUnknownFigure,
};

const char* ToString(ErrorCode code);

// All library failures surface as this exception; `code()` identifies the
// contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ToString(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace splitinfer
