#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cpn {

enum class ErrorKind {
  DuplicateSpecies,
  UnknownSpeciesIndex,
  UnknownSpecies,
  InvalidReaction,
  InvalidValue,
  NonPositiveTemperature,
  DimensionMismatch,
  NonPositiveDt,
  MissingComposition,
  MaxStepsExceeded,
  StepUnderflow,
  InvalidOptions,
  SyntaxError,
  UnknownRateForm,
  NonIntegerCount,
  ZeroGenerationRate,
  InsufficientPoints,
  ZeroMomentOfInertia,
  NonPositiveGap,
  UnmappedLength,
  GridMismatch,
  InvalidProblem,
  SimulationFailure,
  Config,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every domain failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Mechanism-text diagnostic; line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, std::size_t line, std::size_t column, const std::string& message);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string detail_;
};

}  // namespace cpn
