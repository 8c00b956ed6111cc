#pragma once

#include <stdexcept>
#include <string>

namespace sdid {

// Typed failure codes. The CLI maps these onto process exit codes
// (config -> 2, data validation -> 3, solver/inference -> 4), and
// validate_panel reuses the same names for its issue records.
enum class ErrorCode {
  // panel / characteristics data
  UnbalancedPanel,
  DuplicateCell,
  DuplicateUnit,
  DuplicatePeriod,
  DivisionByZero,
  UnknownUnit,
  UnknownColumn,
  RateOutOfRange,
  NegativeCount,
  NonFiniteOutcome,
  NonPositivePopulation,
  NoPrePeriod,
  NoPostPeriod,
  InsufficientPrePeriods,
  InsufficientDonors,
  // donor pool
  EmptyDonorPool,
  InvalidExclusion,
  // solver / inference / oracle
  NonFiniteInput,
  DegenerateDistribution,
  TooLargeForOracle,
  // io / config
  ParseError,
  IoError,
  ConfigError,
};

const char* to_string(ErrorCode code);

// Exit-code buckets used by the CLI front end.
enum class ErrorClass { config = 2, data = 3, solver = 4 };
ErrorClass classify(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace sdid
