#pragma once

// Small statistics toolkit for the Monte Carlo checks.

#include <cstddef>
#include <span>
#include <vector>

namespace fbmpv {

// Running mean / variance (Welford). Feed values in a fixed order for
// reproducible aggregates.
class MeanAccumulator {
 public:
  void add(double x) noexcept;
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept;  // unbiased
  double std_error() const noexcept;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

MeanSE mean_se(std::span<const double> xs) noexcept;

// |m1 - m2| / sqrt(se1^2 + se2^2); zero when both errors vanish and means match.
double z_score(const MeanSE& a, const MeanSE& b) noexcept;

double median(std::vector<double> xs);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
// distribution evaluated at (sqrt(ne) + 0.12 + 0.11/sqrt(ne)) D.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// Survival function of the Kolmogorov distribution, P(K > x).
double kolmogorov_sf(double x) noexcept;

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Ordinary least squares of y on x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

// Slope of log y against log x; every entry must be positive.
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace fbmpv
