#ifndef RISKTREE_ERROR_HPP_
#define RISKTREE_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace risktree {

enum class Errc {
  EmptyTree,
  InvalidTree,
  NonPositiveWeight,
  WeightsDoNotSumToOne,
  InvalidMeasure,
  SpaceMismatch,
  NotMeasurable,
  NotMeasurableEvent,
  EmptyFamily,
  EmptyBattery,
  MassExceedsOne,
  GridTooLarge,
  InvalidDictionary,
  InvalidModel,
  TimeOrderViolation,
  FactorOutOfRange,
  GammaNotGreaterThanOne,
  InsufficientNonVacuousPairs,
  PreconditionNotMet,
  Unsupported,
  ParseError,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace risktree

#endif  // RISKTREE_ERROR_HPP_
