#pragma once

// Histogram estimators of the local time L(x,t) (Plain, step weight ds) and
// of the weighted local time (Weighted, step weight d s^{2H}), built from
// the left-node values of a sampled path.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

#include <json.hpp>

#include "fbmpv/path_sampler.hpp"

namespace fbmpv {

enum class LocalTimeKind { Plain, Weighted };

const char* to_string(LocalTimeKind k) noexcept;

// Bins of width h centred at c_k = (k - half) h, k = 0..2 half. Zero is always
// a bin centre, so the grid is symmetric under x -> -x.
class SpatialGrid {
 public:
  SpatialGrid(double h, std::size_t half);

  // Smallest symmetric grid with spacing h whose centres reach +-radius.
  static SpatialGrid covering(double radius, double h);
  // h = 2 T^H n^{-1/3}, radius 5 T^H.
  static SpatialGrid default_for(double horizon, std::size_t steps, const HurstIndex& h);

  double h() const noexcept { return h_; }
  std::size_t half() const noexcept { return half_; }
  std::size_t size() const noexcept { return 2 * half_ + 1; }
  double center(std::size_t k) const noexcept {
    return (static_cast<double>(k) - static_cast<double>(half_)) * h_;
  }
  double x_min() const noexcept { return center(0); }
  double x_max() const noexcept { return center(size() - 1); }

  // Bin holding x, clamped to the edge bins. Uses std::round so that
  // bin(-x) mirrors bin(x) exactly.
  std::size_t bin(double x, bool* clamped = nullptr) const noexcept;

 private:
  double h_;
  std::size_t half_;
};

struct LocalTimeField {
  SpatialGrid grid;
  std::vector<double> mass;  // occupation weight per bin divided by h
  LocalTimeKind kind = LocalTimeKind::Weighted;
  double horizon = 0.0;  // t
  double hurst = 0.5;
  std::size_t steps = 0;  // time steps used
  std::uint64_t seed = 0;
  double clamped_fraction = 0.0;  // share of weight that fell outside the grid

  // Sum of mass * h: t for Plain, t^{2H} for Weighted.
  double total() const noexcept;
  // Piecewise-linear interpolant through (c_k, mass_k); zero outside the grid.
  double value_at(double x) const noexcept;
  bool coverage_warning() const noexcept { return clamped_fraction > 1e-3; }
};

// Field of the path up to node `upto` (default: the whole path).
LocalTimeField local_time(const SamplePath& path, const SpatialGrid& grid, LocalTimeKind kind,
                          std::size_t upto = std::numeric_limits<std::size_t>::max());

struct OccupationSides {
  double time_side = 0.0;   // sum_i Phi(B_i) w_i
  double space_side = 0.0;  // sum_k Phi(c_k) mass_k h
  double residual() const noexcept;
};

OccupationSides occupation_sides(const SamplePath& path, const SpatialGrid& grid,
                                 const std::function<double(double)>& phi, LocalTimeKind kind);

double occupation_check(const SamplePath& path, const SpatialGrid& grid,
                        const std::function<double(double)>& phi, LocalTimeKind kind);

// Weighted local time at a single level x by a box kernel of width `width`
// centred at x, over the first `upto` steps.
double weighted_local_time_at(const SamplePath& path, double x, double width,
                              std::size_t upto = std::numeric_limits<std::size_t>::max());

struct ModulusRow {
  double offset = 0.0;      // b - a
  double second_moment = 0.0;  // E|L(b,t) - L(a,t)|^2
  double se = 0.0;
  double ratio = 0.0;       // second_moment / offset^alpha
  double ratio_se = 0.0;
};

struct ModulusOptions {
  std::size_t steps = 2048;
  double kernel_width = 0.0;  // 0: half the smallest offset
  unsigned threads = 1;
};

struct ModulusTable {
  double hurst = 0.0;
  double alpha = 0.0;
  double t = 0.0;
  double a = 0.0;
  std::size_t paths = 0;
  std::vector<ModulusRow> rows;

  bool bounded() const noexcept;
  // Each ratio at most the previous one plus three standard errors.
  bool non_increasing() const noexcept;
};

// Monte Carlo second moments of weighted local-time increments (H > 1/2).
ModulusTable lt_modulus_scaling(const HurstIndex& h, double t, double a, const std::vector<double>& offsets,
                                std::size_t paths, std::uint64_t seed, double alpha,
                                const ModulusOptions& opt = {});

// CSV "x,mass" and the JSON sidecar {H, t, kind, h, n, seed}.
void write_field_csv(std::ostream& os, const LocalTimeField& f);
nlohmann::json field_sidecar(const LocalTimeField& f);

}  // namespace fbmpv
