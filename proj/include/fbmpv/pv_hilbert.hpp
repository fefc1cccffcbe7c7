#pragma once

// Principal values against the kernel 1/(x - a) and the Hilbert transform
//   (Hf)(a) = (1/pi) v.p. int f(x) / (x - a) dx.
// A SampledFunction stands for the piecewise-linear interpolant of its node
// values (zero outside the grid); every integral here is exact for that
// interpolant, so the only error is interpolation and truncation.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include "fbmpv/pv_estimate.hpp"

namespace fbmpv {

class SampledFunction {
 public:
  // Nodes x_min + i h, i = 0..values.size()-1. Needs at least two nodes.
  SampledFunction(double x_min, double h, std::vector<double> values);

  static SampledFunction tabulate(double x_min, double x_max, std::size_t m,
                                  const std::function<double(double)>& f);

  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x(size() - 1); }
  double h() const noexcept { return h_; }
  std::size_t size() const noexcept { return values_.size(); }
  double x(std::size_t i) const noexcept { return x_min_ + static_cast<double>(i) * h_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }

  // Linear interpolant; zero outside [x_min, x_max].
  double at(double x) const noexcept;

  // |f| at both ends below 1e-12 max|f|.
  bool has_compact_support() const noexcept;

  double l2_norm_squared() const noexcept;  // sum f^2 h
  double sup_norm() const noexcept;

 private:
  double x_min_;
  double h_;
  std::vector<double> values_;
};

// v.p. int_a^b dx / (c - x) = log((c - a) / (b - c)) for a < c < b.
double pv_log_integral(double a, double c, double b);

// Rung k: int_{|x-a| >= eps_k} f(x) / (x - a) dx. Needs a strictly inside
// the grid and every eps >= 2h.
PVEstimate pv_quadrature(const SampledFunction& f, double a, const std::vector<double>& eps_ladder,
                         double tol = kDefaultPvTolerance);

// One truncated integral int_{|x-a| >= eps} f(x) / (x - a) dx, exact for the
// interpolant at any eps > 0 (no 2h guard).
double pv_truncated(const SampledFunction& f, double a, double eps);

// The epsilon -> 0 limit of pv_quadrature, in closed form.
double pv_limit(const SampledFunction& f, double a);

enum class HilbertMethod { Reference, Fast, Auto };

// Hf at every node, same grid. Reference is the O(m^2) node sum; Fast does
// the same sum as one FFT convolution. Warns when f is not compactly supported.
SampledFunction hilbert_transform(const SampledFunction& f, HilbertMethod method = HilbertMethod::Auto);

// (Hf)(x_i) alone, by the reference node sum.
double hilbert_at_node(const SampledFunction& f, std::size_t i);

// H^{-1} = -H on L^2.
SampledFunction hilbert_inverse(const SampledFunction& g, HilbertMethod method = HilbertMethod::Auto);

// CSV "x,value".
void write_function_csv(std::ostream& os, const SampledFunction& f);

}  // namespace fbmpv
