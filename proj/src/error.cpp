#include "peerloss/error.hpp"

#include <fmt/core.h>

namespace peerloss {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::SumNotLessThanOne: return "SumNotLessThanOne";
    case ErrorCode::DegenerateNoisyPrior: return "DegenerateNoisyPrior";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::ClassOutOfRange: return "ClassOutOfRange";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BadArch: return "BadArch";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownLabelValue: return "UnknownLabelValue";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MissingChannel: return "MissingChannel";
    case ErrorCode::BadRadii: return "BadRadii";
    case ErrorCode::BadFractions: return "BadFractions";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::NoisyTestRefused: return "NoisyTestRefused";
    case ErrorCode::NotTwoDimensional: return "NotTwoDimensional";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::ConditionViolated: return "ConditionViolated";
    case ErrorCode::ConditionNotMet: return "ConditionNotMet";
    case ErrorCode::ConstantOptimal: return "ConstantOptimal";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(fmt::format("{}: {}", to_string(code), message)),
      code_(code) {}

void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace peerloss
