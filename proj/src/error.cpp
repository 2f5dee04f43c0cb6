#include "splitinfer/error.hpp"

namespace splitinfer {

const char* ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kInvalidSplit: return "invalid-split";
    case ErrorCode::kNonFiniteInput: return "non-finite-input";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kCrcMismatch: return "crc-mismatch";
    case ErrorCode::kInflateFailure: return "inflate-failure";
    case ErrorCode::kCompressionFailure: return "compression-failure";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kSampleCount: return "sample-count";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kInvalidParameter: return "invalid-parameter";
    case ErrorCode::kUnknownSplit: return "unknown-split";
    case ErrorCode::kInfeasibleFit: return "infeasible-fit";
    case ErrorCode::kEmptyTrace: return "empty-trace";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kBadVersion: return "bad-version";
    case ErrorCode::kTruncatedFrame: return "truncated-frame";
    case ErrorCode::kConnectionRefused: return "connection-refused";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kBindFailure: return "bind-failure";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kMissingColumn: return "missing-column";
    case ErrorCode::kUnknownFigure: return "unknown-figure-id";
  }
  return "unknown";
}

}  // namespace splitinfer
