#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fbmpv {

enum class Errc {
  InvalidArgument,
  DegeneratePair,
  WrongRegime,
  SingularDiagonal,
  GridTooLarge,
  NotPositiveDefinite,
  EmbeddingFailure,
  EmptyGrid,
  OrderViolation,
  SingularityOffGrid,
  LadderTooFine,
  LadderBelowResolution,
  LagNotOnGrid,
  QuadratureNonConvergence,
  InternalConsistency,
  Validation,
  Io,
  BudgetExceeded,
};

std::string_view to_string(Errc code) noexcept;

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace fbmpv
