#include "fbmpv/pv_functional.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fbmpv/error.hpp"
#include "fbmpv/parallel.hpp"
#include "fbmpv/rng.hpp"
#include "fbmpv/stats.hpp"

namespace fbmpv {

const char* to_string(Route r) noexcept {
  switch (r) {
    case Route::TimeIntegral: return "time_integral";
    case Route::HilbertOfLocalTime: return "hilbert_of_local_time";
    case Route::QuadraticCovariation: return "quadratic_covariation";
  }
  return "?";
}

Route route_from_string(const std::string& s) {
  if (s == "time_integral") return Route::TimeIntegral;
  if (s == "hilbert_of_local_time") return Route::HilbertOfLocalTime;
  if (s == "quadratic_covariation") return Route::QuadraticCovariation;
  throw Error(Errc::Validation, "unknown route '" + s + "'");
}

std::vector<double> default_ladder_for(const SamplePath& path, double floor_factor) {
  const auto& g = *path.grid;
  return default_ladder(g.horizon(), g.hurst(), floor_factor * resolution_floor(g.horizon(), g.steps(), g.hurst()));
}

namespace {

void check_resolution(const SamplePath& path, const std::vector<double>& ladder, const PvOptions& opt) {
  validate_ladder(ladder);
  const auto& g = *path.grid;
  const double floor = opt.floor_factor * resolution_floor(g.horizon(), g.steps(), g.hurst());
  if (ladder.back() < floor * (1.0 - 1e-12)) {
    std::ostringstream os;
    os << "smallest epsilon " << ladder.back() << " below resolution floor " << floor;
    throw Error(Errc::LadderBelowResolution, os.str());
  }
}

// Truncated sum over the steps with `keep(d)`, d = B_i - a.
template <class Keep>
double truncated_sum(const SamplePath& path, double a, std::size_t n, Keep keep) {
  const auto w = path.grid->ds2h_weights();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = path.values[i] - a;
    if (keep(d)) s += w[i] / d;
  }
  return s;
}

}  // namespace

PVEstimate pv_time_integral(const SamplePath& path, double a, const std::vector<double>& eps_ladder,
                            const PvOptions& opt) {
  check_resolution(path, eps_ladder, opt);
  const std::size_t n = std::min(opt.upto, path.steps());
  PVEstimate est;
  est.eps_ladder = eps_ladder;
  for (double eps : eps_ladder) {
    est.rung_values.push_back(truncated_sum(path, a, n, [eps](double d) { return std::abs(d) >= eps; }));
  }
  finalize(est, opt.tol);
  return est;
}

PVEstimate one_sided(const SamplePath& path, double a, Side side, const std::vector<double>& eps_ladder,
                     const LocalTimeField& weighted, const PvOptions& opt) {
  if (weighted.kind != LocalTimeKind::Weighted) {
    throw Error(Errc::InvalidArgument, "one-sided functional needs the weighted local time");
  }
  check_resolution(path, eps_ladder, opt);
  const std::size_t n = std::min(opt.upto, path.steps());
  const double lt = weighted.value_at(a);
  const double sign = side == Side::Plus ? 1.0 : -1.0;
  PVEstimate est;
  est.eps_ladder = eps_ladder;
  for (double eps : eps_ladder) {
    const double tail = truncated_sum(path, a, n, [eps, sign](double d) { return sign * d >= eps; });
    est.rung_values.push_back(sign * std::log(eps) * lt + tail);
  }
  finalize(est, opt.tol);
  return est;
}

SampledFunction field_function(const LocalTimeField& field) {
  return SampledFunction(field.grid.x_min(), field.grid.h(), field.mass);
}

PVEstimate from_local_time(const LocalTimeField& field, double a, const std::vector<double>& eps_ladder,
                           double tol) {
  if (field.grid.size() < 2) throw Error(Errc::EmptyGrid, "field needs two bins");
  validate_ladder(eps_ladder);
  const auto f = field_function(field);
  PVEstimate est;
  est.eps_ladder = eps_ladder;
  est.limit = pv_limit(f, a);  // throws SingularityOffGrid
  for (double eps : eps_ladder) est.rung_values.push_back(pv_truncated(f, a, eps));
  finalize(est, tol);

  // Self-check: at a bin centre the node-sum transform is a second code path.
  const double u = (a - f.x_min()) / f.h();
  const double k = std::round(u);
  if (std::abs(u - k) < 1e-9) {
    const auto i = static_cast<std::size_t>(k);
    const double other = std::numbers::pi * hilbert_at_node(f, i);
    if (std::abs(other - est.limit) > 1e-8 * std::max(1.0, std::abs(est.limit))) {
      std::ostringstream os;
      os << "local-time PV " << est.limit << " disagrees with pi*H " << other;
      throw Error(Errc::InternalConsistency, os.str());
    }
  }
  return est;
}

double qcov(const SamplePath& path, const std::function<double(double)>& f, double eps) {
  const auto& g = *path.grid;
  const HurstIndex h(g.hurst());
  if (h.regime() != Regime::Sub) throw Error(Errc::WrongRegime, "quadratic covariation route needs H < 1/2");
  const double lag = eps / g.dt();
  const double steps = std::round(lag);
  if (!(eps > 0.0) || steps < 1.0 || std::abs(lag - steps) > 1e-9 * lag) {
    std::ostringstream os;
    os << "lag " << eps << " is not a positive multiple of dt = " << g.dt();
    throw Error(Errc::LagNotOnGrid, os.str());
  }
  const auto L = static_cast<std::size_t>(steps);
  if (L > g.steps()) throw Error(Errc::LagNotOnGrid, "lag longer than the horizon");
  const auto w = g.ds2h_weights();
  double s = 0.0;
  for (std::size_t i = 0; i + L <= g.steps() && i < g.steps(); ++i) {
    const double b0 = path.values[i];
    const double b1 = path.values[i + L];
    s += (f(b1) - f(b0)) * (b1 - b0) * w[i];
  }
  return s / pow_nonneg(eps, h.two_h());
}

double BouleauYor::residual() const noexcept { return std::abs(qcov - space_side); }

BouleauYor bouleau_yor_check(const SamplePath& path, const std::function<double(double)>& f,
                             const std::function<double(double)>& df, double eps, const SpatialGrid& grid) {
  BouleauYor out;
  out.qcov = qcov(path, f, eps);
  const auto field = local_time(path, grid, LocalTimeKind::Weighted);
  double s = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (field.mass[k] != 0.0) s += df(grid.center(k)) * field.mass[k];
  }
  out.space_side = s * grid.h();
  return out;
}

double yamada_f(double x) noexcept {
  if (x == 0.0) return 0.0;
  return x * std::log(std::abs(x)) - x;
}

double yamada_residual(const SamplePath& path, double a, const std::vector<double>& eps_ladder,
                       const PvOptions& opt) {
  const std::size_t n = std::min(opt.upto, path.steps());
  const double bt = path.values[n];
  if (n == 0) return yamada_f(bt - a) - yamada_f(-a);
  const auto c = pv_time_integral(path, a, eps_ladder, opt);
  return yamada_f(bt - a) - yamada_f(-a) - 0.5 * c.value;
}

double continuity_exponent(const HurstIndex& h) {
  if (h.regime() != Regime::Super) throw Error(Errc::WrongRegime, "continuity modulus needs H > 1/2");
  return h.value() <= 2.0 / 3.0 ? h.value() : 1.0 - 0.5 * h.value();
}

bool ContinuityTable::bounded() const noexcept {
  return std::all_of(rows.begin(), rows.end(), [](const ContinuityRow& r) { return std::isfinite(r.ratio); });
}

bool ContinuityTable::non_increasing() const noexcept {
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k].ratio > rows[k - 1].ratio + 3.0 * std::hypot(rows[k].ratio_se, rows[k - 1].ratio_se)) {
      return false;
    }
  }
  return true;
}

ContinuityTable continuity_modulus(const HurstIndex& h, const std::vector<std::pair<double, double>>& t_pairs,
                                   std::size_t paths, std::uint64_t seed, const ContinuityOptions& opt) {
  const double h0 = continuity_exponent(h);
  if (t_pairs.empty()) throw Error(Errc::InvalidArgument, "no time pairs");
  double horizon = 0.0;
  for (const auto& [t, tp] : t_pairs) {
    if (!(t >= 0.0 && tp >= t)) throw Error(Errc::InvalidArgument, "time pairs need 0 <= t <= t'");
    horizon = std::max(horizon, tp);
  }
  if (!(horizon > 0.0)) throw Error(Errc::InvalidArgument, "time pairs span no time");
  auto grid = std::make_shared<const TimeGrid>(horizon, opt.steps, h);
  CirculantSampler sampler(grid);
  // times are snapped to the nearest node; rows report the snapped values
  auto node_of = [&](double t) { return static_cast<std::size_t>(std::llround(t / grid->dt())); };
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  for (const auto& [t, tp] : t_pairs) idx.emplace_back(node_of(t), node_of(tp));

  const auto ladder = default_ladder(horizon, h.value(), resolution_floor(horizon, opt.steps, h.value()));
  const double eps = ladder.back();
  const auto w = grid->ds2h_weights();

  const auto per_path = parallel_map<std::vector<double>>(paths, opt.threads, [&](std::size_t k) {
    const auto p = sampler.sample(derive_seed(seed, k));
    std::vector<double> d(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      double s = 0.0;
      for (std::size_t i = idx[j].first; i < idx[j].second; ++i) {
        const double x = p.values[i] - opt.level;
        if (std::abs(x) >= eps) s += w[i] / x;
      }
      d[j] = s * s;
    }
    return d;
  });

  ContinuityTable table{h.value(), h0, paths, {}};
  for (std::size_t j = 0; j < idx.size(); ++j) {
    MeanAccumulator acc;
    for (const auto& d : per_path) acc.add(d[j]);
    const double t0 = grid->node(idx[j].first);
    const double t1 = grid->node(idx[j].second);
    const double scale = t1 > t0 ? std::pow(t1 - t0, 2.0 * h0) : 1.0;
    table.rows.push_back({t0, t1, acc.mean(), acc.std_error(), acc.mean() / scale, acc.std_error() / scale});
  }
  return table;
}

void to_json(nlohmann::json& j, const FunctionalSample& s) {
  j = {{"H", s.hurst},
       {"a", s.a},
       {"t", s.t},
       {"route", to_string(s.route)},
       {"value", s.estimate.value},
       {"eps_ladder", s.estimate.eps_ladder},
       {"rungs", s.estimate.rung_values},
       {"converged", s.estimate.converged},
       {"diag", s.estimate.diag},
       {"seed", s.seed}};
  if (!std::isnan(s.estimate.limit)) j["limit"] = s.estimate.limit;
}

}  // namespace fbmpv
