#pragma once

// Deterministic function families behind the smooth approximation argument:
// the bump zeta on (0,2), its dilations zeta_n, the mollified derivatives
// G_n = F_+' * zeta_n, the pieces F_+, F_-, F, the C^1 truncation F_eps and
// the envelopes psi_1, psi_2.

#include <cstddef>
#include <vector>

namespace fbmpv {

// Absolute tolerance for every mollifier quadrature, scaled by the L1 norm of
// the integrand once that exceeds 1 (derivative integrals reach O(n^2)).
inline constexpr double kMollifierTol = 1e-10;

// Default envelope constant; the worst explicit constant in the bound for
// G_n' near zero is 32.
inline constexpr double kEnvelopeConstant = 34.0;

class MollifierFamily {
 public:
  MollifierFamily();

  // 1 / int_0^2 exp(1/((x-1)^2 - 1)) dx
  double normalizer() const noexcept { return c_; }
  // Quadrature error estimate of the normalising integral.
  double normalizer_error() const noexcept { return c_err_; }

  double zeta(double x) const noexcept;
  double zeta_prime(double x) const noexcept;
  double zeta_n(int n, double x) const;

  // G_n(x) = int_0^2 F_+'(x - y/n) zeta(y) dy; zero for x <= 0.
  double g_n(int n, double x) const;
  // Analytic derivative: int zeta(y) n/(nx - y) dy for x > 2/n, otherwise
  // n^2 int_0^x log(u) zeta'(n(x - u)) du with
  // zeta'(z) = 2 (1 - z) zeta(z) / ((z-1)^2 - 1)^2.
  double g_n_prime(int n, double x) const;
  // Central difference of g_n with step h (default scaled to x).
  double g_n_prime_fd(int n, double x, double h = 0.0) const;

  double psi1(double x) const noexcept;
  double psi2(double x) const noexcept;
  double envelope_constant() const noexcept { return env_c_; }
  void set_envelope_constant(double c);

 private:
  double c_ = 0.0;
  double c_err_ = 0.0;
  double env_c_ = kEnvelopeConstant;
};

// x log x - x on x > 0, else 0.
double f_plus(double x) noexcept;
// x log(-x) - x on x < 0, else 0.
double f_minus(double x) noexcept;
// F = F_+ + F_- = x log|x| - x.
double f_full(double x) noexcept;
// log x on x > 0, else 0.
double f_plus_prime(double x) noexcept;

// C^1 truncation of F_+ at eps: x^2 log(eps)/(2 eps) on (0, eps],
// eps - eps log(eps)/2 + x log x - x beyond.
double f_eps(double eps, double x);
double f_eps_d1(double eps, double x);
double f_eps_d2(double eps, double x);

// Branch values at the junction x = eps, for the continuity checks.
struct JunctionValues {
  double inner = 0.0;
  double outer = 0.0;
};
JunctionValues f_eps_junction(double eps);
JunctionValues f_eps_d1_junction(double eps);

// eps - eps log(eps) / 2
double f_eps_sup_bound(double eps);

// log(1 + 2/(nx - 2)) for x > 2/n: the convergence rate of G_n to log x.
double g_n_convergence_bound(int n, double x);

// Log-spaced points in [lo, hi].
std::vector<double> log_grid(double lo, double hi, std::size_t count);

struct EnvelopeFit {
  double fitted_constant = 0.0;  // max |value| / shape over the sample
  double worst_x = 0.0;
  int worst_n = 0;
  bool pass = false;  // fitted_constant <= envelope constant
};

// max |G_n(x)| / (1 + |log x|) over x in grid, n in ns.
EnvelopeFit fit_g_n_envelope(const MollifierFamily& m, const std::vector<int>& ns, const std::vector<double>& xs);
// max x |G_n'(x)| / (1 + |log x|), derivative by central differences.
EnvelopeFit fit_g_n_prime_envelope(const MollifierFamily& m, const std::vector<int>& ns,
                                   const std::vector<double>& xs);

}  // namespace fbmpv
