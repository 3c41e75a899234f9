#include "cpn/error.hpp"

namespace cpn {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DuplicateSpecies: return "DuplicateSpecies";
    case ErrorKind::UnknownSpeciesIndex: return "UnknownSpeciesIndex";
    case ErrorKind::UnknownSpecies: return "UnknownSpecies";
    case ErrorKind::InvalidReaction: return "InvalidReaction";
    case ErrorKind::InvalidValue: return "InvalidValue";
    case ErrorKind::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonPositiveDt: return "NonPositiveDt";
    case ErrorKind::MissingComposition: return "MissingComposition";
    case ErrorKind::MaxStepsExceeded: return "MaxStepsExceeded";
    case ErrorKind::StepUnderflow: return "StepUnderflow";
    case ErrorKind::InvalidOptions: return "InvalidOptions";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnknownRateForm: return "UnknownRateForm";
    case ErrorKind::NonIntegerCount: return "NonIntegerCount";
    case ErrorKind::ZeroGenerationRate: return "ZeroGenerationRate";
    case ErrorKind::InsufficientPoints: return "InsufficientPoints";
    case ErrorKind::ZeroMomentOfInertia: return "ZeroMomentOfInertia";
    case ErrorKind::NonPositiveGap: return "NonPositiveGap";
    case ErrorKind::UnmappedLength: return "UnmappedLength";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::InvalidProblem: return "InvalidProblem";
    case ErrorKind::SimulationFailure: return "SimulationFailure";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

ParseError::ParseError(ErrorKind kind, std::size_t line, std::size_t column,
                       const std::string& message)
    : Error(kind, std::to_string(line) + ":" + std::to_string(column) + ": " +
                      std::string(to_string(kind)) + ": " + message),
      line_(line),
      column_(column),
      detail_(message) {}

}  // namespace cpn
