#include "risktree/error.hpp"

namespace risktree {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::EmptyTree: return "EmptyTree";
    case Errc::InvalidTree: return "InvalidTree";
    case Errc::NonPositiveWeight: return "NonPositiveWeight";
    case Errc::WeightsDoNotSumToOne: return "WeightsDoNotSumToOne";
    case Errc::InvalidMeasure: return "InvalidMeasure";
    case Errc::SpaceMismatch: return "SpaceMismatch";
    case Errc::NotMeasurable: return "NotMeasurable";
    case Errc::NotMeasurableEvent: return "NotMeasurableEvent";
    case Errc::EmptyFamily: return "EmptyFamily";
    case Errc::EmptyBattery: return "EmptyBattery";
    case Errc::MassExceedsOne: return "MassExceedsOne";
    case Errc::GridTooLarge: return "GridTooLarge";
    case Errc::InvalidDictionary: return "InvalidDictionary";
    case Errc::InvalidModel: return "InvalidModel";
    case Errc::TimeOrderViolation: return "TimeOrderViolation";
    case Errc::FactorOutOfRange: return "FactorOutOfRange";
    case Errc::GammaNotGreaterThanOne: return "GammaNotGreaterThanOne";
    case Errc::InsufficientNonVacuousPairs: return "InsufficientNonVacuousPairs";
    case Errc::PreconditionNotMet: return "PreconditionNotMet";
    case Errc::Unsupported: return "Unsupported";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace risktree
