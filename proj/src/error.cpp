#include "fbmpv/error.hpp"

namespace fbmpv {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DegeneratePair: return "DegeneratePair";
    case Errc::WrongRegime: return "WrongRegime";
    case Errc::SingularDiagonal: return "SingularDiagonal";
    case Errc::GridTooLarge: return "GridTooLarge";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::EmbeddingFailure: return "EmbeddingFailure";
    case Errc::EmptyGrid: return "EmptyGrid";
    case Errc::OrderViolation: return "OrderViolation";
    case Errc::SingularityOffGrid: return "SingularityOffGrid";
    case Errc::LadderTooFine: return "LadderTooFine";
    case Errc::LadderBelowResolution: return "LadderBelowResolution";
    case Errc::LagNotOnGrid: return "LagNotOnGrid";
    case Errc::QuadratureNonConvergence: return "QuadratureNonConvergence";
    case Errc::InternalConsistency: return "InternalConsistency";
    case Errc::Validation: return "Validation";
    case Errc::Io: return "Io";
    case Errc::BudgetExceeded: return "BudgetExceeded";
  }
  return "Unknown";
}

}  // namespace fbmpv
