#pragma once

// Quadrature checks of the density-increment and Lambda-integral estimates
// that carry the existence proofs. Each check evaluates the left side of an
// inequality exactly (up to quadrature) and divides by the right-hand
// envelope; a check passes when the ratios stay finite (and below a known
// constant where one is explicit), and log-log slopes match the envelope
// exponents.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbmpv/fbm_model.hpp"

namespace fbmpv {

struct BoundSample {
  double hurst = 0.0;
  double s = 0.0;
  double r = 0.0;
  double a = 0.0;
  double b = 0.0;
  std::map<std::string, double> extra;  // beta, eps, x, y, z, ...
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio() const noexcept { return rhs > 0.0 ? lhs / rhs : (lhs == 0.0 ? 0.0 : INFINITY); }
};

struct BoundReport {
  std::string lemma_id;
  std::vector<BoundSample> samples;
  double cap = std::numeric_limits<double>::infinity();  // explicit constant, if any
  double fitted_constant = 0.0;                          // max ratio
  bool pass = false;

  void add(BoundSample s);
  // Recompute fitted_constant and pass: every ratio finite and <= cap.
  void finalize();
};

void to_json(nlohmann::json& j, const BoundSample& s);
// One JSON object per line, each tagged with the lemma id.
void write_jsonl(std::ostream& os, const BoundReport& r);
// Header "lemma,samples,fitted_constant,cap,pass" then one row per report.
void write_summary_csv(std::ostream& os, const std::vector<BoundReport>& reports);

// |phi(x,y) - phi(z,y)| against r^{bH} rho^{-1-b} |x-z|^b exp(-b y^2 / (2 r^{2H})).
BoundSample check_density_increment(const HurstIndex& h, double s, double r, double x, double y, double z,
                                    double beta);
// Same in the second coordinate: |phi(x,y) - phi(x,z)| against
// s^{bH} rho^{-1-b} |y-z|^b exp(-b x^2 / (2 s^{2H})).
BoundSample check_density_increment_y(const HurstIndex& h, double s, double r, double x, double y, double z,
                                      double beta);

// phi(x,y) - phi(x,b) - phi(a,y) + phi(a,b), factored through expm1 so that
// the ratio to (x-a)(y-b) stays accurate at the corner.
double density_double_difference(const PairStats& st, double a, double b, double x, double y);

struct QuadratureOptions {
  double tol = 1e-8;        // relative target per 1-D integral
  double accept = 1e-5;     // error estimates above accept * L1 are failures
  unsigned max_depth = 16;  // Gauss-Kronrod bisection depth
  double tail_sd = 12.0;    // infinite ranges cut at this many marginal SDs
};

struct Lambda1Parts {
  double corner = 0.0;  // [a,a+1] x [b,b+1]
  double right = 0.0;   // [a+1,inf) x [b,b+1]
  double top = 0.0;     // [a,a+1] x [b+1,inf)
  double far = 0.0;     // [a+1,inf) x [b+1,inf)
  double error = 0.0;   // summed error estimates
  double total() const noexcept { return corner + right + top + far; }
};

// int_a^inf int_b^inf |Psi(x,y)| / ((x-a)(y-b)) dx dy over the four regions.
Lambda1Parts lambda1_parts(const HurstIndex& h, double s, double r, double a, double b,
                           const QuadratureOptions& opt = {});
double lambda1_quadrature(const HurstIndex& h, double s, double r, double a, double b, double beta,
                          const QuadratureOptions& opt = {});
// s^{bH/2} / (r^{(1+b)H} (s-r)^{(1+b)H})
double lambda1_envelope(const HurstIndex& h, double s, double r, double beta);

struct Lambda34 {
  double lambda3 = 0.0;
  double lambda4 = 0.0;
};

// Truncated double integrals over [a, a+eps]^2 with the linear corrections
// log(u) - u log(eps)/eps and 1/u - log(eps)/eps.
Lambda34 lambda34_quadrature(const HurstIndex& h, double s, double r, double a, double eps, double beta,
                             const QuadratureOptions& opt = {});
// (sr)^{-H/2} eps^H
double lambda3_envelope(const HurstIndex& h, double s, double r, double eps);
// s^{bH/2} / (r^{(1+b/2)H} (s-r)^{(1+b)H}) eps^b (1 + log^2 eps)
double lambda4_envelope(const HurstIndex& h, double s, double r, double eps, double beta);

// int psi_1(x - a) |d/dx phi(x, a)| dx with psi_1(u) = C (1 + |log u|) on u > 0.
double log_weighted_density_integral(const HurstIndex& h, double s, double r, double a, double alpha,
                                     const QuadratureOptions& opt = {}, double c = 1.0);
// (s-r)^{-(1+alpha)H} r^{-(1+alpha)H}
double log_weighted_envelope(const HurstIndex& h, double s, double r, double alpha);

struct SlopeCheck {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  double slope = 0.0;
  double threshold = 0.0;  // pass <=> slope >= threshold
  bool pass = false;
};

// Parameter points for the envelope checks, drawn from mt19937_64(seed):
// H in [0.55, 0.9], r in [0.1, 0.9], s in (r, 1], a and b from
// {-2, -0.5, 0, 0.5, 2}.
struct ParameterPoint {
  double hurst, s, r, a, b;
};
inline constexpr std::uint64_t kDensitySampleSeed = 20240601;
std::vector<ParameterPoint> parameter_sample(std::size_t count, std::uint64_t seed = kDensitySampleSeed);

struct DensitySuiteOptions {
  std::size_t points = 12;
  std::uint64_t seed = kDensitySampleSeed;
  double beta = 0.5;
  double eps = 0.1;
  QuadratureOptions quad;
  unsigned threads = 1;
};

struct DensitySuite {
  std::vector<BoundReport> reports;
  std::vector<SlopeCheck> slopes;
  bool pass() const noexcept;
};

// Every lemma check at the sampled points plus the scaling ladders.
DensitySuite run_density_suite(const DensitySuiteOptions& opt = {});

}  // namespace fbmpv
