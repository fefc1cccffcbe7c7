#pragma once

// Covariance structure of fractional Brownian motion and the Gaussian
// densities built from it.

#include <cstdint>

namespace fbmpv {

enum class Regime { Sub, Brownian, Super };

class HurstIndex {
 public:
  // Throws Error{InvalidArgument} unless 0 < value < 1.
  explicit HurstIndex(double value);

  double value() const noexcept { return value_; }
  Regime regime() const noexcept { return regime_; }
  double two_h() const noexcept { return 2.0 * value_; }

 private:
  double value_;
  Regime regime_;
};

const char* to_string(Regime r) noexcept;

// x^p for x >= 0, computed through exp/log; 0^p is 0 for p > 0 and 1 for p == 0.
double pow_nonneg(double x, double p) noexcept;

// E[B_s B_t] = 1/2 (t^{2H} + s^{2H} - |t-s|^{2H}).
double covariance(const HurstIndex& h, double s, double t);

struct PairStats {
  double hurst;
  double s;
  double r;
  double var_s;  // s^{2H}
  double var_r;  // r^{2H}
  double mu;     // E[B_s B_r]
  double rho2;   // (rs)^{2H} - mu^2

  double rho() const;
};

// Joint second-order statistics of (B_s, B_r). rho2 uses the factorisation
// (r^H s^H - mu)(r^H s^H + mu) with r^H s^H - mu = 1/2((s-r)^{2H} - (s^H - r^H)^2),
// which keeps relative accuracy as s -> r. Rounding-level negatives are clamped.
PairStats pair_stats(const HurstIndex& h, double s, double r);

// phi(s, r) = H(2H-1)|s-r|^{2H-2}; only defined for H > 1/2 and s != r.
double phi_kernel(const HurstIndex& h, double s, double r);

// Density of B_s ~ N(0, s^{2H}).
double marginal_density(const HurstIndex& h, double s, double x);

// Density of (B_s, B_r) at (x, y). Throws DegeneratePair when rho2 == 0.
double pair_density(const PairStats& st, double x, double y);

// d/dx of pair_density(st, x, y).
double pair_density_dx(const PairStats& st, double x, double y);

// Psi_{s,r,a,b}(x,y) = phi(x,y) - phi(x,b) th(1+b-y) - phi(a,y) th(1+a-x)
//                      + phi(a,b) th(1+a-x) th(1+b-y), th = 1{. > 0}.
double psi_correction(const PairStats& st, double a, double b, double x, double y);

// Envelope constants of the two-sided bound on rho2 for s >= r:
//   1/2 (2 - 2^H) r^{2H} (s-r)^{2H} <= rho2 <= 2 r^{2H} (s-r)^{2H}.
struct SandwichBounds {
  double lower;
  double upper;
};
SandwichBounds rho2_sandwich(const HurstIndex& h, double s, double r);

// The two normalised covariance gaps (H > 1/2, s > r > 0):
//   lower_gap = (mu - r^{2H}) / ((s-r) r s^{2H-2})
//   upper_gap = (s^{2H} - mu) / ((s-r) s^{2H-1})
// Both are bounded and bounded away from zero for fixed H.
struct CovarianceGapRatios {
  double lower_gap;
  double upper_gap;
};
CovarianceGapRatios covariance_gap_ratios(const HurstIndex& h, double s, double r);

// (1+x)^a <= 1 + (2^a - 1) x^a on [0,1]^2; returns rhs - lhs (>= 0 when it holds).
double power_inequality_margin(double x, double alpha);

}  // namespace fbmpv
