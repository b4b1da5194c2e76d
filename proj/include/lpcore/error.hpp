#pragma once

#include <stdexcept>
#include <string>

namespace lpcore {

enum class ErrorKind {
  kInvalidExponent,
  kInvalidConfig,
  kDimensionMismatch,
  kNonFinite,
  kZeroRank,
  kRoundingFailed,
  kStageFailure,
  kContract,
  kParse,
  kIo,
};

const char* ToString(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(ToString(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace lpcore
