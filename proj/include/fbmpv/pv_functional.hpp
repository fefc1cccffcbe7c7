#pragma once

// The principal-value functional
//   C_t(a) = v.p. int_0^t 2H s^{2H-1} / (B_s - a) ds
// by three routes: the truncated time integral, the Hilbert transform of the
// weighted local time (pi H L(., t)), and, for H < 1/2, the generalised
// quadratic covariation [log|B - a|, B]_t.

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <json.hpp>

#include "fbmpv/occupation.hpp"
#include "fbmpv/pv_estimate.hpp"
#include "fbmpv/pv_hilbert.hpp"

namespace fbmpv {

enum class Route { TimeIntegral, HilbertOfLocalTime, QuadraticCovariation };
enum class Side { Plus, Minus };

const char* to_string(Route r) noexcept;
Route route_from_string(const std::string& s);

struct PvOptions {
  double tol = kDefaultPvTolerance;
  // Rungs below floor_factor * T^H n^{-H} are refused.
  double floor_factor = 1.0;
  // Restrict the time integral to the first `upto` steps.
  std::size_t upto = std::numeric_limits<std::size_t>::max();
};

// Default ladder for a path: T^H/4 * 2^{-k}, 8 rungs, floored at resolution.
std::vector<double> default_ladder_for(const SamplePath& path, double floor_factor = 1.0);

// Rung k: sum_i 1{|B_i - a| >= eps_k} w_i / (B_i - a).
PVEstimate pv_time_integral(const SamplePath& path, double a, const std::vector<double>& eps_ladder,
                            const PvOptions& opt = {});

// Rung k: (+-log eps_k) L(a,t) + sum_i 1{+-(B_i - a) >= eps_k} w_i / (B_i - a),
// with L(a,t) read from `weighted` (must be a Weighted field of the same path).
PVEstimate one_sided(const SamplePath& path, double a, Side side, const std::vector<double>& eps_ladder,
                     const LocalTimeField& weighted, const PvOptions& opt = {});

// The field as a sampled function on its bin centres (linear interpolant).
SampledFunction field_function(const LocalTimeField& field);

// Rung k: int_{|x-a| >= eps_k} L(x,t) / (x - a) dx for the interpolated field,
// and limit = the exact epsilon -> 0 value, which is checked against
// pi * (H L)(a) computed by the node-sum code path when a is a bin centre.
PVEstimate from_local_time(const LocalTimeField& field, double a, const std::vector<double>& eps_ladder,
                           double tol = kDefaultPvTolerance);

// eps^{-2H} sum_{s_i <= t - eps} (f(B_{i+L}) - f(B_i)) (B_{i+L} - B_i) w_i, L = eps / dt.
double qcov(const SamplePath& path, const std::function<double(double)>& f, double eps);

struct BouleauYor {
  double qcov = 0.0;
  double space_side = 0.0;  // int f'(x) L(x,t) dx from the weighted field
  double residual() const noexcept;
};

BouleauYor bouleau_yor_check(const SamplePath& path, const std::function<double(double)>& f,
                             const std::function<double(double)>& df, double eps, const SpatialGrid& grid);

// F(x) = x log|x| - x with 0 log 0 = 0.
double yamada_f(double x) noexcept;

// F(B_t - a) - F(-a) - C_t(a) / 2, the implied Skorohod integral.
double yamada_residual(const SamplePath& path, double a, const std::vector<double>& eps_ladder,
                       const PvOptions& opt = {});

// H_0 = H on (1/2, 2/3], 1 - H/2 on (2/3, 1).
double continuity_exponent(const HurstIndex& h);

struct ContinuityRow {
  double t = 0.0;
  double t_prime = 0.0;
  double second_moment = 0.0;  // E|C_{t'}(0) - C_t(0)|^2
  double se = 0.0;
  double ratio = 0.0;  // second_moment / (t' - t)^{2 H_0}
  double ratio_se = 0.0;
};

struct ContinuityOptions {
  std::size_t steps = 4096;  // grid on [0, max t']; pair times snap to nodes
  unsigned threads = 1;
  double level = 0.0;
};

struct ContinuityTable {
  double hurst = 0.0;
  double h0 = 0.0;
  std::size_t paths = 0;
  std::vector<ContinuityRow> rows;
  bool bounded() const noexcept;
  bool non_increasing() const noexcept;
};

ContinuityTable continuity_modulus(const HurstIndex& h, const std::vector<std::pair<double, double>>& t_pairs,
                                   std::size_t paths, std::uint64_t seed, const ContinuityOptions& opt = {});

struct FunctionalSample {
  double hurst = 0.5;
  double a = 0.0;
  double t = 0.0;
  Route route = Route::TimeIntegral;
  PVEstimate estimate;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const FunctionalSample& s);

}  // namespace fbmpv
