#include "lpcore/error.hpp"

namespace lpcore {

const char* ToString(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidExponent: return "invalid exponent";
    case ErrorKind::kInvalidConfig: return "invalid config";
    case ErrorKind::kDimensionMismatch: return "dimension mismatch";
    case ErrorKind::kNonFinite: return "non-finite entry";
    case ErrorKind::kZeroRank: return "zero rank";
    case ErrorKind::kRoundingFailed: return "rounding failed";
    case ErrorKind::kStageFailure: return "stage failure";
    case ErrorKind::kContract: return "contract violation";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

}  // namespace lpcore
