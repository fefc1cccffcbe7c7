#pragma once

// Exact fBm samplers on a uniform grid.
//
// CholeskySampler factors the Gram matrix of (B_{s_1}, ..., B_{s_n}) once and
// draws L z. CirculantSampler embeds the autocovariance of the increment
// sequence (fractional Gaussian noise) in a circulant matrix, draws the noise
// with one FFT per path and cumulates it. Both are pure functions of
// (grid, seed) after construction and may be shared across threads.

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fbmpv/time_grid.hpp"

namespace fbmpv {

enum class SamplerMethod { Cholesky, Circulant };

const char* to_string(SamplerMethod m) noexcept;

using GridPtr = std::shared_ptr<const TimeGrid>;

struct SamplePath {
  GridPtr grid;
  std::vector<double> values;  // values[0] == 0
  std::uint64_t seed = 0;
  SamplerMethod method = SamplerMethod::Circulant;

  std::size_t steps() const noexcept { return values.size() - 1; }
};

// Default cap on n for the O(n^3) factorisation.
inline constexpr std::size_t kDefaultCholeskyCap = 4096;

class CholeskySampler {
 public:
  explicit CholeskySampler(GridPtr grid, std::size_t cap = kDefaultCholeskyCap);

  SamplePath sample(std::uint64_t seed) const;
  const GridPtr& grid() const noexcept { return grid_; }

 private:
  GridPtr grid_;
  Eigen::MatrixXd lower_;
};

class CirculantSampler {
 public:
  // Eigenvalues below -tol * max are an embedding failure; those in
  // (-tol * max, 0) are clipped to zero.
  explicit CirculantSampler(GridPtr grid, double tol = 1e-9);
  ~CirculantSampler();
  CirculantSampler(const CirculantSampler&) = delete;
  CirculantSampler& operator=(const CirculantSampler&) = delete;

  SamplePath sample(std::uint64_t seed) const;
  const GridPtr& grid() const noexcept { return grid_; }

  std::size_t embedding_size() const noexcept { return size_; }
  double min_eigenvalue() const noexcept { return min_eig_; }
  double max_eigenvalue() const noexcept { return max_eig_; }

 private:
  GridPtr grid_;
  std::size_t size_ = 0;
  std::vector<double> amplitude_;  // sqrt(lambda_k / M)
  double min_eig_ = 0.0;
  double max_eig_ = 0.0;
  void* plan_ = nullptr;  // fftw_plan
};

// gamma(k) = 1/2 dt^{2H} (|k+1|^{2H} + |k-1|^{2H} - 2|k|^{2H})
double fgn_autocovariance(const HurstIndex& h, double dt, std::size_t lag);

SamplePath sample_cholesky(const HurstIndex& h, const GridPtr& grid, std::uint64_t seed);
SamplePath sample_circulant(const HurstIndex& h, const GridPtr& grid, std::uint64_t seed);

std::vector<double> increments(const SamplePath& path);

// Path with every value negated; same grid, seed and method.
SamplePath reflected(const SamplePath& path);

// CSV with header "s,value", one row per node, 17 significant digits.
void write_path_csv(std::ostream& os, const SamplePath& path);

}  // namespace fbmpv
