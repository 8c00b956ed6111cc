#include "sdid/errors.hpp"

namespace sdid {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorCode::DuplicateCell: return "DuplicateCell";
    case ErrorCode::DuplicateUnit: return "DuplicateUnit";
    case ErrorCode::DuplicatePeriod: return "DuplicatePeriod";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::UnknownUnit: return "UnknownUnit";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::RateOutOfRange: return "RateOutOfRange";
    case ErrorCode::NegativeCount: return "NegativeCount";
    case ErrorCode::NonFiniteOutcome: return "NonFiniteOutcome";
    case ErrorCode::NonPositivePopulation: return "NonPositivePopulation";
    case ErrorCode::NoPrePeriod: return "NoPrePeriod";
    case ErrorCode::NoPostPeriod: return "NoPostPeriod";
    case ErrorCode::InsufficientPrePeriods: return "InsufficientPrePeriods";
    case ErrorCode::InsufficientDonors: return "InsufficientDonors";
    case ErrorCode::EmptyDonorPool: return "EmptyDonorPool";
    case ErrorCode::InvalidExclusion: return "InvalidExclusion";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::TooLargeForOracle: return "TooLargeForOracle";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

ErrorClass classify(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::ConfigError:
    case ErrorCode::InsufficientDonors:
    case ErrorCode::TooLargeForOracle:
      return ErrorClass::config;
    case ErrorCode::NonFiniteInput:
    case ErrorCode::DegenerateDistribution:
      return ErrorClass::solver;
    default:
      return ErrorClass::data;
  }
}

}  // namespace sdid
