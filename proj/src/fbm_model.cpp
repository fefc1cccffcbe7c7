#include "fbmpv/fbm_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fbmpv/error.hpp"

namespace fbmpv {

HurstIndex::HurstIndex(double value) : value_(value) {
  if (!(value > 0.0 && value < 1.0)) {
    std::ostringstream os;
    os << "Hurst index must lie in (0,1), got " << value;
    throw Error(Errc::InvalidArgument, os.str());
  }
  regime_ = value < 0.5 ? Regime::Sub : (value == 0.5 ? Regime::Brownian : Regime::Super);
}

const char* to_string(Regime r) noexcept {
  switch (r) {
    case Regime::Sub: return "sub";
    case Regime::Brownian: return "brownian";
    case Regime::Super: return "super";
  }
  return "?";
}

double pow_nonneg(double x, double p) noexcept {
  if (x == 0.0) return p == 0.0 ? 1.0 : 0.0;
  return std::exp(p * std::log(x));
}

double covariance(const HurstIndex& h, double s, double t) {
  if (s < 0.0 || t < 0.0) throw Error(Errc::InvalidArgument, "covariance requires s, t >= 0");
  const double p = h.two_h();
  return 0.5 * (pow_nonneg(t, p) + pow_nonneg(s, p) - pow_nonneg(std::abs(t - s), p));
}

double PairStats::rho() const { return std::sqrt(rho2); }

PairStats pair_stats(const HurstIndex& h, double s, double r) {
  if (!(s > 0.0 && r > 0.0)) throw Error(Errc::InvalidArgument, "pair_stats requires s, r > 0");
  const double hv = h.value();
  const double p = h.two_h();
  PairStats st{};
  st.hurst = hv;
  st.s = s;
  st.r = r;
  st.var_s = pow_nonneg(s, p);
  st.var_r = pow_nonneg(r, p);
  st.mu = covariance(h, s, r);

  const double hi = std::max(s, r);
  const double lo = std::min(s, r);
  const double sd_prod = std::exp(hv * (std::log(s) + std::log(r)));
  // hi^H - lo^H without cancellation
  const double sd_gap = -pow_nonneg(hi, hv) * std::expm1(hv * std::log(lo / hi));
  const double diag_gap = 0.5 * (pow_nonneg(hi - lo, p) - sd_gap * sd_gap);
  double rho2 = diag_gap * (sd_prod + st.mu);

  const double scale = sd_prod * sd_prod;
  if (rho2 < 0.0) {
    if (rho2 > -1e-12 * scale) {
      rho2 = 0.0;
    } else {
      throw Error(Errc::InternalConsistency, "negative determinant factor rho2");
    }
  }
  st.rho2 = rho2;
  return st;
}

double phi_kernel(const HurstIndex& h, double s, double r) {
  if (h.regime() != Regime::Super) throw Error(Errc::WrongRegime, "phi_kernel requires H > 1/2");
  if (s == r) throw Error(Errc::SingularDiagonal, "phi_kernel is singular on s == r");
  const double hv = h.value();
  return hv * (2.0 * hv - 1.0) * pow_nonneg(std::abs(s - r), 2.0 * hv - 2.0);
}

double marginal_density(const HurstIndex& h, double s, double x) {
  if (!(s > 0.0)) throw Error(Errc::InvalidArgument, "marginal_density requires s > 0");
  const double sd = pow_nonneg(s, h.value());
  const double z = x / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

namespace {

void require_nondegenerate(const PairStats& st) {
  if (!(st.rho2 > 0.0)) throw Error(Errc::DegeneratePair, "rho2 == 0 (s == r)");
}

inline double quad_form(const PairStats& st, double x, double y) {
  return (st.var_r * x * x - 2.0 * st.mu * x * y + st.var_s * y * y) / (2.0 * st.rho2);
}

}  // namespace

double pair_density(const PairStats& st, double x, double y) {
  require_nondegenerate(st);
  return std::exp(-quad_form(st, x, y)) / (2.0 * std::numbers::pi * st.rho());
}

double pair_density_dx(const PairStats& st, double x, double y) {
  return -pair_density(st, x, y) * (st.var_r * x - st.mu * y) / st.rho2;
}

double psi_correction(const PairStats& st, double a, double b, double x, double y) {
  require_nondegenerate(st);
  const bool tx = (1.0 + a - x) > 0.0;
  const bool ty = (1.0 + b - y) > 0.0;
  double v = pair_density(st, x, y);
  if (ty) v -= pair_density(st, x, b);
  if (tx) v -= pair_density(st, a, y);
  if (tx && ty) v += pair_density(st, a, b);
  return v;
}

SandwichBounds rho2_sandwich(const HurstIndex& h, double s, double r) {
  if (s < r) throw Error(Errc::InvalidArgument, "rho2_sandwich requires s >= r");
  const double p = h.two_h();
  const double base = pow_nonneg(r, p) * pow_nonneg(s - r, p);
  return {0.5 * (2.0 - std::exp2(h.value())) * base, 2.0 * base};
}

CovarianceGapRatios covariance_gap_ratios(const HurstIndex& h, double s, double r) {
  if (h.regime() != Regime::Super) throw Error(Errc::WrongRegime, "covariance gaps need H > 1/2");
  if (!(s > r && r > 0.0)) throw Error(Errc::InvalidArgument, "covariance gaps need s > r > 0");
  // With x = r/s both ratios depend on x only:
  //   lower = (1 - x^{2H} - (1-x)^{2H}) / (2 x (1-x)),
  //   upper = (1 - x^{2H} + (1-x)^{2H}) / (2 (1-x)).
  const double p = h.two_h();
  const double x = r / s;
  const double one_minus_xp = -std::expm1(p * std::log(x));
  const double y = pow_nonneg((s - r) / s, p);
  return {(one_minus_xp - y) / (2.0 * x * ((s - r) / s)), (one_minus_xp + y) / (2.0 * ((s - r) / s))};
}

double power_inequality_margin(double x, double alpha) {
  const double lhs = pow_nonneg(1.0 + x, alpha);
  const double rhs = 1.0 + (std::exp2(alpha) - 1.0) * pow_nonneg(x, alpha);
  return rhs - lhs;
}

}  // namespace fbmpv
