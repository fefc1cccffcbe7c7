#pragma once

#include <cmath>
#include <vector>

#include <json.hpp>

namespace fbmpv {

// A principal-value functional evaluated along a decreasing epsilon ladder.
struct PVEstimate {
  double value = 0.0;  // final rung
  std::vector<double> eps_ladder;
  std::vector<double> rung_values;
  bool converged = false;
  double diag = 0.0;  // max successive-rung difference over the final 3 rungs
  // Exact epsilon -> 0 limit when the route has one (local-time route), else NaN.
  double limit = std::nan("");
};

inline constexpr double kDefaultPvTolerance = 1e-2;

// Fills value, diag and converged from rung_values.
void finalize(PVEstimate& est, double tol = kDefaultPvTolerance);

// Geometric ladder eps0 * 2^{-k}, k = 0..rungs-1.
std::vector<double> geometric_ladder(double eps0, std::size_t rungs);

// Default ladder T^H/4 * 2^{-k}, 8 rungs, dropping rungs below `floor`.
// Throws LadderBelowResolution if nothing survives.
std::vector<double> default_ladder(double horizon, double hurst, double floor);

// Resolution floor T^H n^{-H}: the typical one-step increment.
double resolution_floor(double horizon, std::size_t steps, double hurst);

// Throws InvalidArgument unless strictly decreasing and positive.
void validate_ladder(const std::vector<double>& ladder);

void to_json(nlohmann::json& j, const PVEstimate& e);

}  // namespace fbmpv
