#include "fbmpv/pv_estimate.hpp"

#include <algorithm>

#include "fbmpv/error.hpp"
#include "fbmpv/fbm_model.hpp"

namespace fbmpv {

void finalize(PVEstimate& est, double tol) {
  const auto& r = est.rung_values;
  if (r.empty()) throw Error(Errc::InvalidArgument, "estimate without rungs");
  est.value = r.back();
  double d = 0.0;
  const std::size_t first = r.size() >= 3 ? r.size() - 3 : 0;
  for (std::size_t k = first + 1; k < r.size(); ++k) d = std::max(d, std::abs(r[k] - r[k - 1]));
  est.diag = d;
  est.converged = d <= tol;
}

std::vector<double> geometric_ladder(double eps0, std::size_t rungs) {
  std::vector<double> out(rungs);
  for (std::size_t k = 0; k < rungs; ++k) out[k] = std::ldexp(eps0, -static_cast<int>(k));
  return out;
}

double resolution_floor(double horizon, std::size_t steps, double hurst) {
  return pow_nonneg(horizon / static_cast<double>(steps), hurst);
}

std::vector<double> default_ladder(double horizon, double hurst, double floor) {
  auto ladder = geometric_ladder(0.25 * pow_nonneg(horizon, hurst), 8);
  ladder.erase(std::remove_if(ladder.begin(), ladder.end(), [&](double e) { return e < floor; }),
               ladder.end());
  if (ladder.empty()) throw Error(Errc::LadderBelowResolution, "no default rung above the resolution floor");
  return ladder;
}

void validate_ladder(const std::vector<double>& ladder) {
  if (ladder.empty()) throw Error(Errc::InvalidArgument, "empty epsilon ladder");
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    if (!(ladder[k] > 0.0)) throw Error(Errc::InvalidArgument, "epsilon ladder must be positive");
    if (k > 0 && !(ladder[k] < ladder[k - 1])) {
      throw Error(Errc::InvalidArgument, "epsilon ladder must be strictly decreasing");
    }
  }
}

void to_json(nlohmann::json& j, const PVEstimate& e) {
  j = {{"value", e.value},         {"eps_ladder", e.eps_ladder}, {"rungs", e.rung_values},
       {"converged", e.converged}, {"diag", e.diag}};
  if (!std::isnan(e.limit)) j["limit"] = e.limit;
}

}  // namespace fbmpv
