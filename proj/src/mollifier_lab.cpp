#include "fbmpv/mollifier_lab.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "fbmpv/error.hpp"

namespace fbmpv {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr unsigned kMaxDepth = 15;
constexpr double kRelTol = 1e-11;

// exp(1/((x-1)^2 - 1)) on (0,2); (x-1)^2 - 1 = x(x-2) avoids cancellation.
double bump(double x) noexcept {
  if (!(x > 0.0 && x < 2.0)) return 0.0;
  return std::exp(1.0 / (x * (x - 2.0)));
}

template <class F>
double integrate(F f, double a, double b, const char* what) {
  double err = 0.0;
  double l1 = 0.0;
  const double v = gauss_kronrod<double, 61>::integrate(f, a, b, kMaxDepth, kRelTol, &err, &l1);
  if (!(err <= kMollifierTol * std::max(1.0, l1)) || !std::isfinite(v)) {
    std::ostringstream os;
    os << what << ": achieved error " << err << " above " << kMollifierTol;
    throw Error(Errc::QuadratureNonConvergence, os.str());
  }
  return v;
}

// Double-exponential rule for integrands with an endpoint log singularity.
template <class F>
double integrate_singular(F f, double a, double b, const char* what) {
  thread_local boost::math::quadrature::tanh_sinh<double> rule;
  double err = 0.0;
  double l1 = 0.0;
  const double v = rule.integrate(f, a, b, 1e-14, &err, &l1);
  if (!(err <= kMollifierTol * std::max(1.0, l1)) || !std::isfinite(v)) {
    std::ostringstream os;
    os << what << ": achieved error " << err << " above " << kMollifierTol;
    throw Error(Errc::QuadratureNonConvergence, os.str());
  }
  return v;
}

void require_n(int n) {
  if (n < 2) throw Error(Errc::InvalidArgument, "mollifier index n must be >= 2");
}

void require_eps(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw Error(Errc::InvalidArgument, "F_eps needs eps in (0,1)");
}

}  // namespace

MollifierFamily::MollifierFamily() {
  double err = 0.0;
  const double mass = gauss_kronrod<double, 61>::integrate(bump, 0.0, 2.0, kMaxDepth, kRelTol, &err);
  c_ = 1.0 / mass;
  c_err_ = err * c_ * c_;
}

double MollifierFamily::zeta(double x) const noexcept { return c_ * bump(x); }

double MollifierFamily::zeta_prime(double x) const noexcept {
  if (!(x > 0.0 && x < 2.0)) return 0.0;
  const double q = x * (x - 2.0);
  return zeta(x) * 2.0 * (1.0 - x) / (q * q);
}

double MollifierFamily::zeta_n(int n, double x) const {
  require_n(n);
  return n * zeta(n * x);
}

// For 0 < x <= 2/n the integral is n int_0^x log(u) zeta(n(x - u)) du with
// the log singularity at the endpoint u = 0.
double MollifierFamily::g_n(int n, double x) const {
  require_n(n);
  if (x <= 0.0) return 0.0;
  const double nd = n;
  if (x > 2.0 / nd) {
    return integrate([&](double y) { return std::log(x - y / nd) * zeta(y); }, 0.0, 2.0, "G_n");
  }
  return integrate_singular([&](double u) { return nd * std::log(u) * zeta(nd * (x - u)); }, 0.0, x, "G_n");
}

double MollifierFamily::g_n_prime(int n, double x) const {
  require_n(n);
  if (x <= 0.0) return 0.0;
  const double nd = n;
  if (x > 2.0 / nd) {
    return integrate([&](double y) { return zeta(y) * nd / (nd * x - y); }, 0.0, 2.0, "G_n'");
  }
  return integrate_singular([&](double u) { return nd * nd * std::log(u) * zeta_prime(nd * (x - u)); }, 0.0, x,
                            "G_n'");
}

double MollifierFamily::g_n_prime_fd(int n, double x, double h) const {
  if (h <= 0.0) h = x > 0.0 ? 1e-4 * x : 1e-6;
  return (g_n(n, x + h) - g_n(n, x - h)) / (2.0 * h);
}

double MollifierFamily::psi1(double x) const noexcept {
  return x > 0.0 ? env_c_ * (1.0 + std::abs(std::log(x))) : 0.0;
}

double MollifierFamily::psi2(double x) const noexcept {
  return x > 0.0 ? env_c_ * (1.0 + std::abs(std::log(x))) / x : 0.0;
}

void MollifierFamily::set_envelope_constant(double c) {
  if (!(c > 0.0)) throw Error(Errc::InvalidArgument, "envelope constant must be positive");
  env_c_ = c;
}

double f_plus(double x) noexcept { return x > 0.0 ? x * std::log(x) - x : 0.0; }

double f_minus(double x) noexcept { return x < 0.0 ? x * std::log(-x) - x : 0.0; }

double f_full(double x) noexcept { return f_plus(x) + f_minus(x); }

double f_plus_prime(double x) noexcept { return x > 0.0 ? std::log(x) : 0.0; }

double f_eps(double eps, double x) {
  require_eps(eps);
  if (x <= 0.0) return 0.0;
  const double le = std::log(eps);
  if (x <= eps) return x * x * le / (2.0 * eps);
  return eps - 0.5 * eps * le + x * std::log(x) - x;
}

double f_eps_d1(double eps, double x) {
  require_eps(eps);
  if (x <= 0.0) return 0.0;
  if (x <= eps) return x * std::log(eps) / eps;
  return std::log(x);
}

// Undefined at 0 and eps; 0 and 1/eps are used there.
double f_eps_d2(double eps, double x) {
  require_eps(eps);
  if (x <= 0.0) return 0.0;
  if (x < eps) return std::log(eps) / eps;
  return 1.0 / x;
}

JunctionValues f_eps_junction(double eps) {
  require_eps(eps);
  const double le = std::log(eps);
  return {eps * eps * le / (2.0 * eps), eps - 0.5 * eps * le + eps * le - eps};
}

JunctionValues f_eps_d1_junction(double eps) {
  require_eps(eps);
  return {eps * std::log(eps) / eps, std::log(eps)};
}

double f_eps_sup_bound(double eps) {
  require_eps(eps);
  return eps - 0.5 * eps * std::log(eps);
}

double g_n_convergence_bound(int n, double x) {
  require_n(n);
  const double nx = n * x;
  if (!(nx > 2.0)) throw Error(Errc::InvalidArgument, "convergence bound needs x > 2/n");
  return std::log1p(2.0 / (nx - 2.0));
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi > lo) || count < 2) throw Error(Errc::InvalidArgument, "log_grid needs 0 < lo < hi, count >= 2");
  std::vector<double> xs(count);
  const double step = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) xs[i] = lo * std::exp(step * static_cast<double>(i));
  xs.back() = hi;
  return xs;
}

namespace {

template <class F>
EnvelopeFit fit(const MollifierFamily& m, const std::vector<int>& ns, const std::vector<double>& xs, F ratio) {
  EnvelopeFit out;
  for (int n : ns) {
    for (double x : xs) {
      const double r = ratio(n, x);
      if (!(r <= out.fitted_constant)) {
        out.fitted_constant = r;
        out.worst_x = x;
        out.worst_n = n;
      }
    }
  }
  out.pass = std::isfinite(out.fitted_constant) && out.fitted_constant <= m.envelope_constant();
  return out;
}

}  // namespace

EnvelopeFit fit_g_n_envelope(const MollifierFamily& m, const std::vector<int>& ns, const std::vector<double>& xs) {
  return fit(m, ns, xs, [&](int n, double x) { return std::abs(m.g_n(n, x)) / (1.0 + std::abs(std::log(x))); });
}

EnvelopeFit fit_g_n_prime_envelope(const MollifierFamily& m, const std::vector<int>& ns,
                                   const std::vector<double>& xs) {
  return fit(m, ns, xs,
             [&](int n, double x) { return x * std::abs(m.g_n_prime_fd(n, x)) / (1.0 + std::abs(std::log(x))); });
}

}  // namespace fbmpv
