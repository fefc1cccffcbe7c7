#include "fbmpv/pv_hilbert.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

#include <fftw3.h>

#include "fbmpv/error.hpp"
#include "fbmpv/log.hpp"

namespace fbmpv {

SampledFunction::SampledFunction(double x_min, double h, std::vector<double> values)
    : x_min_(x_min), h_(h), values_(std::move(values)) {
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(Errc::InvalidArgument, "grid spacing must be positive");
  if (values_.size() < 2) throw Error(Errc::EmptyGrid, "sampled function needs two nodes");
}

SampledFunction SampledFunction::tabulate(double x_min, double x_max, std::size_t m,
                                          const std::function<double(double)>& f) {
  if (m < 2 || !(x_max > x_min)) throw Error(Errc::InvalidArgument, "bad tabulation grid");
  const double h = (x_max - x_min) / static_cast<double>(m - 1);
  std::vector<double> v(m);
  for (std::size_t i = 0; i < m; ++i) v[i] = f(x_min + static_cast<double>(i) * h);
  return SampledFunction(x_min, h, std::move(v));
}

double SampledFunction::at(double xq) const noexcept {
  const double u = (xq - x_min_) / h_;
  const double last = static_cast<double>(size() - 1);
  if (!(u >= 0.0) || u > last) return 0.0;
  const auto j = static_cast<std::size_t>(u);
  if (j + 1 >= size()) return values_.back();
  const double f = u - static_cast<double>(j);
  return (1.0 - f) * values_[j] + f * values_[j + 1];
}

bool SampledFunction::has_compact_support() const noexcept {
  const double peak = sup_norm();
  return std::abs(values_.front()) <= 1e-12 * peak && std::abs(values_.back()) <= 1e-12 * peak;
}

double SampledFunction::l2_norm_squared() const noexcept {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s * h_;
}

double SampledFunction::sup_norm() const noexcept {
  double s = 0.0;
  for (double v : values_) s = std::max(s, std::abs(v));
  return s;
}

double pv_log_integral(double a, double c, double b) {
  if (!(a < c && c < b)) {
    std::ostringstream os;
    os << "pv_log_integral needs a < c < b, got (" << a << ", " << c << ", " << b << ")";
    throw Error(Errc::OrderViolation, os.str());
  }
  return std::log((c - a) / (b - c));
}

namespace {

void require_inside(const SampledFunction& f, double a) {
  if (!(a > f.x_min() && a < f.x_max())) {
    std::ostringstream os;
    os << "singularity " << a << " outside (" << f.x_min() << ", " << f.x_max() << ")";
    throw Error(Errc::SingularityOffGrid, os.str());
  }
}

// int_{u1}^{u2} (v + s (x - a)) / (x - a) dx with u1, u2 on the same side of a,
// v being the cell's linear piece extended to x = a.
inline double linear_over_pole(double value_at_a, double slope, double u1, double u2, double a) {
  return slope * (u2 - u1) + value_at_a * std::log1p((u2 - u1) / (u1 - a));
}

}  // namespace

PVEstimate pv_quadrature(const SampledFunction& f, double a, const std::vector<double>& eps_ladder,
                         double tol) {
  require_inside(f, a);
  validate_ladder(eps_ladder);
  if (eps_ladder.back() < 2.0 * f.h()) {
    std::ostringstream os;
    os << "smallest epsilon " << eps_ladder.back() << " below 2h = " << 2.0 * f.h();
    throw Error(Errc::LadderTooFine, os.str());
  }
  PVEstimate est;
  est.eps_ladder = eps_ladder;
  for (double eps : eps_ladder) est.rung_values.push_back(pv_truncated(f, a, eps));
  finalize(est, tol);
  return est;
}

double pv_truncated(const SampledFunction& f, double a, double eps) {
  const double lo = a - eps;
  const double hi = a + eps;
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < f.size(); ++j) {
    const double x0 = f.x(j);
    const double x1 = f.x(j + 1);
    if (x1 <= hi && x0 >= lo) continue;
    const double slope = (f[j + 1] - f[j]) / f.h();
    const double at_a = f[j] + slope * (a - x0);
    // left part [x0, min(x1, lo)] and right part [max(x0, hi), x1]
    const double l1 = std::min(x1, lo);
    if (l1 > x0) sum += linear_over_pole(at_a, slope, x0, l1, a);
    const double r0 = std::max(x0, hi);
    if (x1 > r0) sum += linear_over_pole(at_a, slope, r0, x1, a);
  }
  return sum;
}

double pv_limit(const SampledFunction& f, double a) {
  require_inside(f, a);
  const double fa = f.at(a);
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < f.size(); ++j) {
    const double x0 = f.x(j);
    const double x1 = f.x(j + 1);
    const double slope = (f[j + 1] - f[j]) / f.h();
    sum += f[j + 1] - f[j];  // slope * h
    if (x0 <= a && a <= x1) continue;  // (f(x) - f(a)) / (x - a) == slope here
    const double coef = f[j] + slope * (a - x0) - fa;
    sum += coef * std::log1p(f.h() / (x0 - a));
  }
  return sum + fa * std::log((f.x_max() - a) / (a - f.x_min()));
}

namespace {

// log|(k+1)/k|, the integral of 1/(x - a) over one cell k cells away.
inline double cell_log(long k) { return std::log1p(1.0 / static_cast<double>(k)); }

// Node sum of pv_limit at x_i after the f(x_i) terms telescope away:
//   PV_i = (f_end - f_0) + sum_{j not in {i-1, i}} ((1+k) f_j - k f_{j+1}) log((k+1)/k),  k = j - i.
double node_pv(const std::vector<double>& f, long i) {
  const long m = static_cast<long>(f.size());
  double s = f.back() - f.front();
  for (long j = 0; j + 1 < m; ++j) {
    const long k = j - i;
    if (k == 0 || k == -1) continue;
    s += ((1.0 + static_cast<double>(k)) * f[j] - static_cast<double>(k) * f[j + 1]) * cell_log(k);
  }
  return s;
}

std::vector<double> node_pv_reference(const std::vector<double>& f) {
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = node_pv(f, static_cast<long>(i));
  return out;
}

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// Same sum as a correlation: PV_i = (f_end - f_0) + sum_j f_j K(j - i) minus
// the two boundary cells that do not exist, with
//   K(k) = (1+k) L(k) - (k-1) L(k-1),  L(0) = L(-1) = 0.
std::vector<double> node_pv_fast(const std::vector<double>& f) {
  const long m = static_cast<long>(f.size());
  auto L = [](long k) { return (k == 0 || k == -1) ? 0.0 : cell_log(k); };
  auto K = [&](long k) {
    return (1.0 + static_cast<double>(k)) * L(k) - (static_cast<double>(k) - 1.0) * L(k - 1);
  };
  const std::size_t size = std::bit_ceil(static_cast<std::size_t>(2 * m));
  const std::size_t half = size / 2 + 1;
  double* a = fftw_alloc_real(size);
  double* b = fftw_alloc_real(size);
  fftw_complex* fa = fftw_alloc_complex(half);
  fftw_complex* fb = fftw_alloc_complex(half);
  fftw_plan pa;
  fftw_plan pb;
  fftw_plan pinv;
  {
    std::lock_guard lock(fftw_mutex());
    pa = fftw_plan_dft_r2c_1d(static_cast<int>(size), a, fa, FFTW_ESTIMATE);
    pb = fftw_plan_dft_r2c_1d(static_cast<int>(size), b, fb, FFTW_ESTIMATE);
    pinv = fftw_plan_dft_c2r_1d(static_cast<int>(size), fa, a, FFTW_ESTIMATE);
  }
  // correlation g_i = sum_j f_j K(j - i) = sum_j f_j Kr(i - j) with Kr(d) = K(-d)
  std::fill(a, a + size, 0.0);
  std::fill(b, b + size, 0.0);
  for (long j = 0; j < m; ++j) a[j] = f[j];
  for (long d = 0; d < m; ++d) b[d] = K(-d);
  for (long d = 1; d < m; ++d) b[size - d] = K(d);
  fftw_execute(pa);
  fftw_execute(pb);
  const double norm = 1.0 / static_cast<double>(size);
  for (std::size_t k = 0; k < half; ++k) {
    const double re = fa[k][0] * fb[k][0] - fa[k][1] * fb[k][1];
    const double im = fa[k][0] * fb[k][1] + fa[k][1] * fb[k][0];
    fa[k][0] = re * norm;
    fa[k][1] = im * norm;
  }
  fftw_execute(pinv);

  std::vector<double> out(f.size());
  const double ends = f.back() - f.front();
  for (long i = 0; i < m; ++i) {
    // cell m-1 does not exist: drop f_{m-1} (1+k) L(k), k = m-1-i;
    // cell -1 does not exist: drop -f_0 (k-1) L(k-1), k = -i.
    const long kl = m - 1 - i;
    const long kf = -i;
    const double missing = f[m - 1] * (1.0 + static_cast<double>(kl)) * L(kl) -
                           f[0] * (static_cast<double>(kf) - 1.0) * L(kf - 1);
    out[i] = ends + a[i] - missing;
  }
  {
    std::lock_guard lock(fftw_mutex());
    fftw_destroy_plan(pa);
    fftw_destroy_plan(pb);
    fftw_destroy_plan(pinv);
  }
  fftw_free(a);
  fftw_free(b);
  fftw_free(fa);
  fftw_free(fb);
  return out;
}

}  // namespace

SampledFunction hilbert_transform(const SampledFunction& f, HilbertMethod method) {
  if (!f.has_compact_support()) warn("Hilbert transform of a function that does not vanish at the grid ends");
  if (method == HilbertMethod::Auto) method = f.size() > 512 ? HilbertMethod::Fast : HilbertMethod::Reference;
  auto pv = method == HilbertMethod::Fast ? node_pv_fast(f.values()) : node_pv_reference(f.values());
  for (double& v : pv) v *= std::numbers::inv_pi;
  return SampledFunction(f.x_min(), f.h(), std::move(pv));
}

double hilbert_at_node(const SampledFunction& f, std::size_t i) {
  if (i >= f.size()) throw Error(Errc::InvalidArgument, "node index out of range");
  return node_pv(f.values(), static_cast<long>(i)) * std::numbers::inv_pi;
}

SampledFunction hilbert_inverse(const SampledFunction& g, HilbertMethod method) {
  auto out = hilbert_transform(g, method);
  for (double& v : out.values()) v = -v;
  return out;
}

void write_function_csv(std::ostream& os, const SampledFunction& f) {
  os << "x,value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < f.size(); ++i) os << f.x(i) << ',' << f[i] << '\n';
}

}  // namespace fbmpv
