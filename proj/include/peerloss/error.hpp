#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace peerloss {

enum class ErrorCode {
  OutOfRange,
  SumNotLessThanOne,
  DegenerateNoisyPrior,
  LabelOutOfRange,
  ClassOutOfRange,
  TooFewSamples,
  ShapeMismatch,
  DimensionMismatch,
  BadArch,
  NonFiniteGradient,
  ParseError,
  UnknownLabelValue,
  MissingColumn,
  MissingChannel,
  BadRadii,
  BadFractions,
  DivergedLoss,
  NoisyTestRefused,
  NotTwoDimensional,
  BudgetExceeded,
  ConditionViolated,
  ConditionNotMet,
  ConstantOptimal,
  InvalidArgument,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries a code so callers (the CLI,
// the Python module) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

}  // namespace peerloss
