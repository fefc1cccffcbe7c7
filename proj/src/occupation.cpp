#include "fbmpv/occupation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "fbmpv/error.hpp"
#include "fbmpv/parallel.hpp"
#include "fbmpv/rng.hpp"
#include "fbmpv/stats.hpp"

namespace fbmpv {

const char* to_string(LocalTimeKind k) noexcept {
  return k == LocalTimeKind::Plain ? "plain" : "weighted";
}

SpatialGrid::SpatialGrid(double h, std::size_t half) : h_(h), half_(half) {
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(Errc::InvalidArgument, "bin width must be positive");
}

SpatialGrid SpatialGrid::covering(double radius, double h) {
  if (!(radius >= 0.0)) throw Error(Errc::InvalidArgument, "grid radius must be nonnegative");
  if (!(h > 0.0)) throw Error(Errc::InvalidArgument, "bin width must be positive");
  const double half = std::ceil(radius / h - 1e-12);
  if (half > 5e7) throw Error(Errc::InvalidArgument, "spatial grid too large");
  return SpatialGrid(h, static_cast<std::size_t>(half));
}

SpatialGrid SpatialGrid::default_for(double horizon, std::size_t steps, const HurstIndex& h) {
  const double scale = pow_nonneg(horizon, h.value());
  const double width = 2.0 * scale * std::cbrt(1.0 / static_cast<double>(steps));
  return covering(5.0 * scale, width);
}

std::size_t SpatialGrid::bin(double x, bool* clamped) const noexcept {
  const double k = std::round(x / h_);
  const double lim = static_cast<double>(half_);
  bool out = false;
  double kk = k;
  if (!(kk >= -lim)) {
    kk = -lim;
    out = true;
  } else if (kk > lim) {
    kk = lim;
    out = true;
  }
  if (clamped != nullptr) *clamped = out;
  return static_cast<std::size_t>(kk + lim);
}

double LocalTimeField::total() const noexcept {
  double s = 0.0;
  for (double m : mass) s += m;
  return s * grid.h();
}

double LocalTimeField::value_at(double x) const noexcept {
  const double u = (x - grid.x_min()) / grid.h();
  const double last = static_cast<double>(grid.size() - 1);
  if (!(u >= 0.0) || u > last) return 0.0;
  const auto j = static_cast<std::size_t>(u);
  if (j + 1 >= grid.size()) return mass.back();
  const double f = u - static_cast<double>(j);
  return (1.0 - f) * mass[j] + f * mass[j + 1];
}

LocalTimeField local_time(const SamplePath& path, const SpatialGrid& grid, LocalTimeKind kind,
                          std::size_t upto) {
  if (path.values.size() < 2) throw Error(Errc::EmptyGrid, "path has no steps");
  const std::size_t n = std::min(upto, path.steps());
  if (n == 0) throw Error(Errc::EmptyGrid, "local time over zero steps");
  const auto& tg = *path.grid;
  const auto w = tg.ds2h_weights();
  const double dt = tg.dt();

  LocalTimeField f{grid, std::vector<double>(grid.size(), 0.0), kind, tg.node(n), tg.hurst(), n,
                   path.seed, 0.0};
  double clamped_weight = 0.0;
  double total_weight = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = kind == LocalTimeKind::Weighted ? w[i] : dt;
    bool clamped = false;
    f.mass[grid.bin(path.values[i], &clamped)] += wi;
    if (clamped) clamped_weight += wi;
    total_weight += wi;
  }
  const double inv_h = 1.0 / grid.h();
  for (double& m : f.mass) m *= inv_h;
  f.clamped_fraction = clamped_weight / total_weight;
  return f;
}

double OccupationSides::residual() const noexcept { return std::abs(time_side - space_side); }

OccupationSides occupation_sides(const SamplePath& path, const SpatialGrid& grid,
                                 const std::function<double(double)>& phi, LocalTimeKind kind) {
  const auto field = local_time(path, grid, kind);
  const auto w = path.grid->ds2h_weights();
  const double dt = path.grid->dt();
  OccupationSides out;
  for (std::size_t i = 0; i < path.steps(); ++i) {
    out.time_side += phi(path.values[i]) * (kind == LocalTimeKind::Weighted ? w[i] : dt);
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (field.mass[k] != 0.0) out.space_side += phi(grid.center(k)) * field.mass[k];
  }
  out.space_side *= grid.h();
  return out;
}

double occupation_check(const SamplePath& path, const SpatialGrid& grid,
                        const std::function<double(double)>& phi, LocalTimeKind kind) {
  return occupation_sides(path, grid, phi, kind).residual();
}

double weighted_local_time_at(const SamplePath& path, double x, double width, std::size_t upto) {
  if (!(width > 0.0)) throw Error(Errc::InvalidArgument, "kernel width must be positive");
  const std::size_t n = std::min(upto, path.steps());
  const auto w = path.grid->ds2h_weights();
  const double half = 0.5 * width;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = path.values[i] - x;
    if (d >= -half && d < half) acc += w[i];
  }
  return acc / width;
}

bool ModulusTable::bounded() const noexcept {
  for (const auto& r : rows) {
    if (!std::isfinite(r.ratio)) return false;
  }
  return true;
}

bool ModulusTable::non_increasing() const noexcept {
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k].ratio > rows[k - 1].ratio + 3.0 * std::hypot(rows[k].ratio_se, rows[k - 1].ratio_se)) {
      return false;
    }
  }
  return true;
}

ModulusTable lt_modulus_scaling(const HurstIndex& h, double t, double a, const std::vector<double>& offsets,
                                std::size_t paths, std::uint64_t seed, double alpha,
                                const ModulusOptions& opt) {
  if (h.regime() != Regime::Super) throw Error(Errc::WrongRegime, "local-time modulus needs H > 1/2");
  if (offsets.empty()) throw Error(Errc::InvalidArgument, "no offsets");
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    if (!(offsets[k] > 0.0)) throw Error(Errc::InvalidArgument, "offsets must be positive");
    if (k > 0 && !(offsets[k] < offsets[k - 1])) throw Error(Errc::InvalidArgument, "offsets must decrease");
  }
  const double width = opt.kernel_width > 0.0 ? opt.kernel_width : 0.5 * offsets.back();
  auto grid = std::make_shared<const TimeGrid>(t, opt.steps, h);
  CirculantSampler sampler(grid);

  // per path: squared increments for every offset
  const auto per_path = parallel_map<std::vector<double>>(paths, opt.threads, [&](std::size_t k) {
    const auto p = sampler.sample(derive_seed(seed, k));
    const double la = weighted_local_time_at(p, a, width);
    std::vector<double> d(offsets.size());
    for (std::size_t j = 0; j < offsets.size(); ++j) {
      const double lb = weighted_local_time_at(p, a + offsets[j], width);
      d[j] = (lb - la) * (lb - la);
    }
    return d;
  });

  ModulusTable table{h.value(), alpha, t, a, paths, {}};
  for (std::size_t j = 0; j < offsets.size(); ++j) {
    MeanAccumulator acc;
    for (const auto& d : per_path) acc.add(d[j]);
    const double scale = std::pow(offsets[j], alpha);
    table.rows.push_back({offsets[j], acc.mean(), acc.std_error(), acc.mean() / scale, acc.std_error() / scale});
  }
  return table;
}

void write_field_csv(std::ostream& os, const LocalTimeField& f) {
  os << "x,mass\n" << std::setprecision(17);
  for (std::size_t k = 0; k < f.grid.size(); ++k) os << f.grid.center(k) << ',' << f.mass[k] << '\n';
}

nlohmann::json field_sidecar(const LocalTimeField& f) {
  return {{"H", f.hurst}, {"t", f.horizon}, {"kind", to_string(f.kind)}, {"h", f.grid.h()},
          {"n", f.steps},  {"seed", f.seed}, {"clamped_fraction", f.clamped_fraction}};
}

}  // namespace fbmpv
