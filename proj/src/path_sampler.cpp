#include "fbmpv/path_sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>

#include <fftw3.h>

#include "fbmpv/error.hpp"
#include "fbmpv/rng.hpp"

namespace fbmpv {

namespace {

// FFTW planning is not thread safe; execution with new arrays is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : data(fftw_alloc_complex(n)), size(n) {
    if (data == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;

  fftw_complex* data;
  std::size_t size;
};

}  // namespace

const char* to_string(SamplerMethod m) noexcept {
  return m == SamplerMethod::Cholesky ? "cholesky" : "circulant";
}

double fgn_autocovariance(const HurstIndex& h, double dt, std::size_t lag) {
  const double p = h.two_h();
  const double k = static_cast<double>(lag);
  const double base = 0.5 * pow_nonneg(dt, p);
  if (lag == 0) return 2.0 * base;
  return base * (pow_nonneg(k + 1.0, p) + pow_nonneg(k - 1.0, p) - 2.0 * pow_nonneg(k, p));
}

CholeskySampler::CholeskySampler(GridPtr grid, std::size_t cap) : grid_(std::move(grid)) {
  const std::size_t n = grid_->steps();
  if (n > cap) {
    std::ostringstream os;
    os << "Cholesky sampler supports n <= " << cap << ", got " << n;
    throw Error(Errc::GridTooLarge, os.str());
  }
  const HurstIndex h(grid_->hurst());
  Eigen::MatrixXd gram(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double c = covariance(h, grid_->node(i + 1), grid_->node(j + 1));
      gram(i, j) = c;
      gram(j, i) = c;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw Error(Errc::NotPositiveDefinite, "fBm Gram matrix failed to factor");
  }
  lower_ = llt.matrixL();
}

SamplePath CholeskySampler::sample(std::uint64_t seed) const {
  const std::size_t n = grid_->steps();
  NormalSource normal(seed);
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = normal();
  const Eigen::VectorXd x = lower_.triangularView<Eigen::Lower>() * z;

  SamplePath path{grid_, std::vector<double>(n + 1, 0.0), seed, SamplerMethod::Cholesky};
  for (std::size_t i = 0; i < n; ++i) path.values[i + 1] = x[i];
  return path;
}

CirculantSampler::CirculantSampler(GridPtr grid, double tol) : grid_(std::move(grid)) {
  const std::size_t n = grid_->steps();
  const HurstIndex h(grid_->hurst());
  const double dt = grid_->dt();

  size_ = std::max<std::size_t>(2, std::bit_ceil(2 * (n - 1)));
  FftwBuffer row(size_);
  for (std::size_t k = 0; k < size_; ++k) {
    const std::size_t lag = std::min(k, size_ - k);
    row.data[k][0] = fgn_autocovariance(h, dt, lag);
    row.data[k][1] = 0.0;
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(size_), row.data, row.data, FFTW_FORWARD,
                             FFTW_ESTIMATE);
  }
  fftw_execute(static_cast<fftw_plan>(plan_));

  std::vector<double> eig(size_);
  for (std::size_t k = 0; k < size_; ++k) eig[k] = row.data[k][0];
  max_eig_ = *std::max_element(eig.begin(), eig.end());
  min_eig_ = *std::min_element(eig.begin(), eig.end());
  if (min_eig_ < -tol * max_eig_) {
    std::ostringstream os;
    os << "circulant embedding has eigenvalue " << min_eig_ << " (max " << max_eig_ << ")";
    throw Error(Errc::EmbeddingFailure, os.str());
  }
  amplitude_.resize(size_);
  const double m = static_cast<double>(size_);
  for (std::size_t k = 0; k < size_; ++k) amplitude_[k] = std::sqrt(std::max(eig[k], 0.0) / m);
}

CirculantSampler::~CirculantSampler() {
  if (plan_ != nullptr) {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_));
  }
}

SamplePath CirculantSampler::sample(std::uint64_t seed) const {
  const std::size_t n = grid_->steps();
  NormalSource normal(seed);
  FftwBuffer buf(size_);
  for (std::size_t k = 0; k < size_; ++k) {
    const double re = normal();
    const double im = normal();
    buf.data[k][0] = amplitude_[k] * re;
    buf.data[k][1] = amplitude_[k] * im;
  }
  fftw_execute_dft(static_cast<fftw_plan>(plan_), buf.data, buf.data);

  SamplePath path{grid_, std::vector<double>(n + 1, 0.0), seed, SamplerMethod::Circulant};
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += buf.data[i][0];
    path.values[i + 1] = acc;
  }
  return path;
}

SamplePath sample_cholesky(const HurstIndex& h, const GridPtr& grid, std::uint64_t seed) {
  if (grid->hurst() != h.value()) throw Error(Errc::InvalidArgument, "grid built for another H");
  return CholeskySampler(grid).sample(seed);
}

SamplePath sample_circulant(const HurstIndex& h, const GridPtr& grid, std::uint64_t seed) {
  if (grid->hurst() != h.value()) throw Error(Errc::InvalidArgument, "grid built for another H");
  return CirculantSampler(grid).sample(seed);
}

std::vector<double> increments(const SamplePath& path) {
  std::vector<double> out(path.steps());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = path.values[i + 1] - path.values[i];
  return out;
}

SamplePath reflected(const SamplePath& path) {
  SamplePath out = path;
  for (double& v : out.values) v = -v;
  return out;
}

void write_path_csv(std::ostream& os, const SamplePath& path) {
  os << "s,value\n";
  os << std::setprecision(17);
  const auto nodes = path.grid->nodes();
  for (std::size_t i = 0; i < path.values.size(); ++i) {
    os << nodes[i] << ',' << path.values[i] << '\n';
  }
}

}  // namespace fbmpv
