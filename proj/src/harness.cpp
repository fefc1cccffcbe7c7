#include "fbmpv/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include "fbmpv/density_analysis.hpp"
#include "fbmpv/error.hpp"
#include "fbmpv/mollifier_lab.hpp"
#include "fbmpv/parallel.hpp"
#include "fbmpv/rng.hpp"
#include "fbmpv/stats.hpp"

namespace fbmpv {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& msg) {
  throw Error(Errc::Validation, field + ": " + msg);
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) field_error(where, "expected an object");
  const std::string prefix = where == "config" ? "" : where + ".";
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; });
    if (!known) field_error(prefix + it.key(), "unknown key");
  }
}

double read_number(const json& j, const std::string& field) {
  if (!j.is_number()) field_error(field, "expected a number");
  return j.get<double>();
}

std::uint64_t read_unsigned(const json& j, const std::string& field) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    if (j.get<std::int64_t>() < 0) field_error(field, "must be nonnegative");
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  field_error(field, "expected a nonnegative integer");
}

std::string read_string(const json& j, const std::string& field) {
  if (!j.is_string()) field_error(field, "expected a string");
  return j.get<std::string>();
}

template <class T, class Fn>
void read_if(const json& j, const char* key, T& out, Fn&& reader, const std::string& prefix = "") {
  if (auto it = j.find(key); it != j.end()) out = reader(*it, prefix + key);
}

json mean_se_json(const MeanSE& m) { return json{{"mean", m.mean}, {"se", m.se}, {"count", m.count}}; }

std::string indexed_name(const char* stem, std::size_t k, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu%s", stem, k, ext);
  return buf;
}

class Budget {
 public:
  explicit Budget(double seconds) : limit_(seconds), start_(std::chrono::steady_clock::now()) {}
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  void check(const char* stage) const {
    if (limit_ > 0.0 && elapsed() > limit_) {
      std::ostringstream os;
      os << "budget of " << limit_ << " s exceeded during " << stage;
      throw Error(Errc::BudgetExceeded, os.str());
    }
  }

 private:
  double limit_;
  std::chrono::steady_clock::time_point start_;
};

// Sampler for the configured grid; path k uses derive_seed(master, k).
class PathSource {
 public:
  PathSource(const ExperimentConfig& c, std::size_t steps)
      : hurst_(c.hurst), master_(c.master_seed),
        grid_(std::make_shared<const TimeGrid>(c.horizon, steps, HurstIndex(c.hurst))) {
    if (c.sampler == SamplerMethod::Circulant) {
      circulant_ = std::make_unique<CirculantSampler>(grid_);
    } else {
      cholesky_ = std::make_unique<CholeskySampler>(grid_);
    }
  }
  explicit PathSource(const ExperimentConfig& c) : PathSource(c, c.steps) {}

  std::uint64_t seed(std::size_t k) const noexcept { return derive_seed(master_, k); }
  SamplePath path(std::size_t k) const {
    return circulant_ ? circulant_->sample(seed(k)) : cholesky_->sample(seed(k));
  }
  const TimeGrid& grid() const noexcept { return *grid_; }

 private:
  double hurst_;
  std::uint64_t master_;
  GridPtr grid_;
  std::unique_ptr<CirculantSampler> circulant_;
  std::unique_ptr<CholeskySampler> cholesky_;
};

void prepare_out_dir(const ExperimentConfig& c, const RunContext& ctx) {
  if (!ctx.write_files) return;
  std::error_code ec;
  std::filesystem::create_directories(c.out_dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + c.out_dir + ": " + ec.message());
}

std::ofstream open_out(const ExperimentConfig& c, const std::string& name) {
  const auto p = std::filesystem::path(c.out_dir) / name;
  std::ofstream os(p);
  if (!os) throw Error(Errc::Io, "cannot write " + p.string());
  return os;
}

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t j) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

// Value of the Hilbert-of-local-time route at one level; levels outside the
// field grid have no singularity and use the plain truncated integral.
double hilbert_route_value(const LocalTimeField& field, double a, const std::vector<double>& ladder) {
  const double lo = field.grid.x_min();
  const double hi = field.grid.x_max();
  if (a > lo && a < hi) return from_local_time(field, a, ladder).value;
  return pv_truncated(field_function(field), a, ladder.back());
}

double route_value(Route r, const SamplePath& p, const LocalTimeField* field, double a,
                   const std::vector<double>& ladder, const ExperimentConfig& c) {
  switch (r) {
    case Route::TimeIntegral: {
      PvOptions opt;
      opt.floor_factor = effective_floor_factor(c);
      return pv_time_integral(p, a, ladder, opt).value;
    }
    case Route::HilbertOfLocalTime:
      return hilbert_route_value(*field, a, ladder);
    case Route::QuadraticCovariation:
      return qcov(p, [a](double x) { return std::log(std::abs(x - a)); },
                  static_cast<double>(c.qcov_lag) * p.grid->dt());
  }
  return NAN;
}

double bump_value(const BumpSpec& b, double x) {
  const double u = (x - b.center) / b.width;
  return std::exp(-u * u);
}

double bump_derivative(const BumpSpec& b, double x) {
  const double u = (x - b.center) / b.width;
  return -2.0 * u / b.width * std::exp(-u * u);
}

Check make_check(std::string name, CheckKind kind, bool passed, std::string detail, json values = json::object()) {
  Check c;
  c.name = std::move(name);
  c.kind = kind;
  c.passed = passed;
  c.detail = std::move(detail);
  c.values = std::move(values);
  return c;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

}  // namespace

// ---- configuration ----

json to_json(const ExperimentConfig& c) {
  json routes = json::array();
  for (Route r : c.routes) routes.push_back(to_string(r));
  return json{
      {"H", c.hurst},
      {"T", c.horizon},
      {"n", c.steps},
      {"paths", c.paths},
      {"master_seed", c.master_seed},
      {"levels", c.levels},
      {"eps_ladder", {{"eps0", c.ladder.eps0}, {"rungs", c.ladder.rungs}, {"floor_factor", c.ladder.floor_factor}}},
      {"spatial_grid", {{"h", c.grid.h}, {"radius", c.grid.radius}}},
      {"routes", routes},
      {"sampler", to_string(c.sampler)},
      {"field_kind", to_string(c.field_kind)},
      {"qcov_lag", c.qcov_lag},
      {"bump", {{"center", c.bump.center}, {"width", c.bump.width}}},
      {"budget_seconds", c.budget_seconds},
      {"out_dir", c.out_dir},
  };
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, "config",
             {"H", "T", "n", "paths", "master_seed", "levels", "eps_ladder", "spatial_grid", "routes", "sampler",
              "field_kind", "qcov_lag", "bump", "budget_seconds", "out_dir"});
  ExperimentConfig c;
  read_if(j, "H", c.hurst, read_number);
  read_if(j, "T", c.horizon, read_number);
  read_if(j, "n", c.steps, read_unsigned);
  read_if(j, "paths", c.paths, read_unsigned);
  read_if(j, "master_seed", c.master_seed, read_unsigned);
  if (auto it = j.find("levels"); it != j.end()) {
    if (!it->is_array()) field_error("levels", "expected an array of numbers");
    c.levels.clear();
    for (std::size_t k = 0; k < it->size(); ++k) {
      c.levels.push_back(read_number((*it)[k], "levels[" + std::to_string(k) + "]"));
    }
  }
  if (auto it = j.find("eps_ladder"); it != j.end()) {
    check_keys(*it, "eps_ladder", {"eps0", "rungs", "floor_factor"});
    read_if(*it, "eps0", c.ladder.eps0, read_number, "eps_ladder.");
    read_if(*it, "rungs", c.ladder.rungs, read_unsigned, "eps_ladder.");
    read_if(*it, "floor_factor", c.ladder.floor_factor, read_number, "eps_ladder.");
  }
  if (auto it = j.find("spatial_grid"); it != j.end()) {
    check_keys(*it, "spatial_grid", {"h", "radius"});
    read_if(*it, "h", c.grid.h, read_number, "spatial_grid.");
    read_if(*it, "radius", c.grid.radius, read_number, "spatial_grid.");
  }
  if (auto it = j.find("routes"); it != j.end()) {
    if (!it->is_array()) field_error("routes", "expected an array of route names");
    c.routes.clear();
    for (std::size_t k = 0; k < it->size(); ++k) {
      const std::string field = "routes[" + std::to_string(k) + "]";
      const std::string name = read_string((*it)[k], field);
      try {
        c.routes.push_back(route_from_string(name));
      } catch (const Error&) {
        field_error(field, "unknown route '" + name + "'");
      }
    }
  }
  if (auto it = j.find("sampler"); it != j.end()) {
    const std::string s = read_string(*it, "sampler");
    if (s == "circulant") c.sampler = SamplerMethod::Circulant;
    else if (s == "cholesky") c.sampler = SamplerMethod::Cholesky;
    else field_error("sampler", "expected 'circulant' or 'cholesky', got '" + s + "'");
  }
  if (auto it = j.find("field_kind"); it != j.end()) {
    const std::string s = read_string(*it, "field_kind");
    if (s == "weighted") c.field_kind = LocalTimeKind::Weighted;
    else if (s == "plain") c.field_kind = LocalTimeKind::Plain;
    else field_error("field_kind", "expected 'weighted' or 'plain', got '" + s + "'");
  }
  read_if(j, "qcov_lag", c.qcov_lag, read_unsigned);
  if (auto it = j.find("bump"); it != j.end()) {
    check_keys(*it, "bump", {"center", "width"});
    read_if(*it, "center", c.bump.center, read_number, "bump.");
    read_if(*it, "width", c.bump.width, read_number, "bump.");
  }
  read_if(j, "budget_seconds", c.budget_seconds, read_number);
  read_if(j, "out_dir", c.out_dir, read_string);
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::Io, "cannot read config " + path);
  json j;
  try {
    j = json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw Error(Errc::Validation, "config: " + std::string(e.what()));
  }
  return config_from_json(j);
}

namespace {

// log|B_0 - a| is infinite at a = 0 since every path starts there.
void require_qcov_levels(const ExperimentConfig& c) {
  for (std::size_t k = 0; k < c.levels.size(); ++k) {
    if (c.levels[k] == 0.0) {
      field_error("levels[" + std::to_string(k) + "]", "quadratic covariation of log|x - a| needs a != 0");
    }
  }
}

}  // namespace

void validate(const ExperimentConfig& c) {
  if (!(c.hurst > 0.0 && c.hurst < 1.0)) field_error("H", "must lie in (0, 1), got " + fmt("%g", c.hurst));
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) field_error("T", "must be positive and finite");
  if (c.steps < 2) field_error("n", "needs at least 2 steps");
  if (c.sampler == SamplerMethod::Cholesky && c.steps > kDefaultCholeskyCap) {
    field_error("n", "exceeds the Cholesky cap of " + std::to_string(kDefaultCholeskyCap));
  }
  if (c.paths < 1) field_error("paths", "needs at least one path");
  if (c.levels.empty()) field_error("levels", "must not be empty");
  for (std::size_t k = 0; k < c.levels.size(); ++k) {
    if (!std::isfinite(c.levels[k])) field_error("levels[" + std::to_string(k) + "]", "must be finite");
  }
  if (!(c.ladder.eps0 >= 0.0)) field_error("eps_ladder.eps0", "must be nonnegative");
  if (c.ladder.rungs < 1) field_error("eps_ladder.rungs", "needs at least one rung");
  if (!(c.ladder.floor_factor >= 0.0)) field_error("eps_ladder.floor_factor", "must be nonnegative");
  if (!(c.grid.h >= 0.0)) field_error("spatial_grid.h", "must be nonnegative");
  if (!(c.grid.radius >= 0.0)) field_error("spatial_grid.radius", "must be nonnegative");
  if (c.routes.empty()) field_error("routes", "must not be empty");
  for (std::size_t k = 0; k < c.routes.size(); ++k) {
    for (std::size_t m = 0; m < k; ++m) {
      if (c.routes[m] == c.routes[k]) field_error("routes[" + std::to_string(k) + "]", "duplicate route");
    }
    if (c.routes[k] == Route::QuadraticCovariation && !(c.hurst < 0.5)) {
      field_error("routes[" + std::to_string(k) + "]", "quadratic_covariation needs H < 1/2");
    }
  }
  if (c.qcov_lag < 1 || c.qcov_lag >= c.steps) field_error("qcov_lag", "must lie in [1, n)");
  if (std::find(c.routes.begin(), c.routes.end(), Route::QuadraticCovariation) != c.routes.end()) {
    require_qcov_levels(c);
  }
  if (!(c.bump.width > 0.0)) field_error("bump.width", "must be positive");
  if (!(c.budget_seconds >= 0.0)) field_error("budget_seconds", "must be nonnegative");
  if (c.out_dir.empty()) field_error("out_dir", "must not be empty");
  effective_ladder(c);
}

double effective_floor_factor(const ExperimentConfig& c) {
  if (c.ladder.floor_factor > 0.0) return c.ladder.floor_factor;
  return c.hurst < 0.5 ? 0.1 : 1.0;
}

SpatialGrid effective_grid(const ExperimentConfig& c) {
  const HurstIndex h(c.hurst);
  if (c.grid.h == 0.0 && c.grid.radius == 0.0) return SpatialGrid::default_for(c.horizon, c.steps, h);
  const double scale = pow_nonneg(c.horizon, c.hurst);
  const double width = c.grid.h > 0.0 ? c.grid.h : 2.0 * scale * std::cbrt(1.0 / static_cast<double>(c.steps));
  const double radius = c.grid.radius > 0.0 ? c.grid.radius : 5.0 * scale;
  return SpatialGrid::covering(radius, width);
}

std::vector<double> effective_ladder(const ExperimentConfig& c) {
  const double eps0 = c.ladder.eps0 > 0.0 ? c.ladder.eps0 : 0.25 * pow_nonneg(c.horizon, c.hurst);
  const double floor = effective_floor_factor(c) * resolution_floor(c.horizon, c.steps, c.hurst);
  auto ladder = geometric_ladder(eps0, c.ladder.rungs);
  ladder.erase(std::remove_if(ladder.begin(), ladder.end(), [&](double e) { return e < floor; }), ladder.end());
  if (ladder.empty()) {
    field_error("eps_ladder", "every rung lies below the resolution floor " + fmt("%g", floor));
  }
  return ladder;
}

// ---- records ----

void to_json(json& j, const Check& c) {
  j = json{{"name", c.name},
           {"kind", c.kind == CheckKind::Assertion ? "assertion" : "diagnostic"},
           {"passed", c.passed},
           {"detail", c.detail},
           {"values", c.values}};
}

bool RunRecord::passed() const noexcept {
  return std::none_of(checks.begin(), checks.end(),
                      [](const Check& c) { return c.kind == CheckKind::Assertion && !c.passed; });
}

json to_json(const RunRecord& r) {
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back(c);
  return json{{"command", r.command},     {"suite", r.suite}, {"config", to_json(r.config)},
              {"per_path", r.per_path},   {"ensemble", r.ensemble}, {"checks", checks},
              {"files", r.files},         {"passed", r.passed()},   {"wall_clock", r.wall_clock}};
}

Suite suite_from_string(const std::string& s) {
  if (s == "bounds") return Suite::Bounds;
  if (s == "identities") return Suite::Identities;
  if (s == "all") return Suite::All;
  throw Error(Errc::Validation, "suite: expected bounds, identities or all, got '" + s + "'");
}

const char* to_string(Suite s) noexcept {
  switch (s) {
    case Suite::Bounds: return "bounds";
    case Suite::Identities: return "identities";
    case Suite::All: return "all";
  }
  return "?";
}

bool same_numbers(const json& a, const json& b) {
  json x = a;
  json y = b;
  x.erase("wall_clock");
  y.erase("wall_clock");
  return x == y;
}

std::string write_record(const RunRecord& r) {
  std::error_code ec;
  std::filesystem::create_directories(r.config.out_dir, ec);
  const std::string name = r.command + (r.suite.empty() ? "" : "_" + r.suite) + "_record.json";
  auto os = open_out(r.config, name);
  os << to_json(r).dump(2) << '\n';
  if (!os) throw Error(Errc::Io, "failed writing " + name);
  return (std::filesystem::path(r.config.out_dir) / name).string();
}

int exit_code(const RunRecord& r) noexcept { return r.passed() ? 0 : 3; }

// ---- commands ----

RunRecord cmd_sample(const ExperimentConfig& c, const RunContext& ctx) {
  validate(c);
  const Budget budget(c.budget_seconds);
  prepare_out_dir(c, ctx);
  RunRecord rec;
  rec.command = "sample";
  rec.config = c;
  const PathSource src(c);
  struct Row {
    std::uint64_t seed;
    double endpoint;
    std::string file;
  };
  const auto rows = parallel_map<Row>(c.paths, ctx.threads, [&](std::size_t k) {
    budget.check("sampling");
    const auto p = src.path(k);
    Row row{p.seed, p.values.back(), indexed_name("path", k, ".csv")};
    if (ctx.write_files) {
      auto os = open_out(c, row.file);
      write_path_csv(os, p);
    }
    return row;
  });
  json seeds = json::array();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rec.per_path.push_back({{"index", k}, {"seed", rows[k].seed}, {"file", rows[k].file}, {"endpoint", rows[k].endpoint}});
    rec.files.push_back(rows[k].file);
    seeds.push_back(rows[k].seed);
  }
  const json manifest{{"H", c.hurst},   {"T", c.horizon},          {"n", c.steps},
                      {"paths", c.paths}, {"master_seed", c.master_seed}, {"sampler", to_string(c.sampler)},
                      {"seeds", seeds},  {"files", rec.files}};
  if (ctx.write_files) open_out(c, "manifest.json") << manifest.dump(2) << '\n';
  rec.files.push_back("manifest.json");
  std::vector<double> ends;
  for (const auto& r : rows) ends.push_back(r.endpoint);
  rec.ensemble = {{"endpoint", mean_se_json(mean_se(ends))},
                  {"endpoint_variance_exact", pow_nonneg(c.horizon, 2.0 * c.hurst)}};
  rec.wall_clock = budget.elapsed();
  return rec;
}

RunRecord cmd_pv(const ExperimentConfig& c, const RunContext& ctx) {
  validate(c);
  const Budget budget(c.budget_seconds);
  RunRecord rec;
  rec.command = "pv";
  rec.config = c;
  const PathSource src(c);
  const auto ladder = effective_ladder(c);
  const auto grid = effective_grid(c);
  const bool need_field =
      std::find(c.routes.begin(), c.routes.end(), Route::HilbertOfLocalTime) != c.routes.end();
  const std::size_t nl = c.levels.size();
  const std::size_t nr = c.routes.size();

  // values[k][l * nr + r]
  const auto values = parallel_map<std::vector<double>>(c.paths, ctx.threads, [&](std::size_t k) {
    budget.check("pv");
    const auto p = src.path(k);
    std::unique_ptr<LocalTimeField> field;
    if (need_field) field = std::make_unique<LocalTimeField>(local_time(p, grid, LocalTimeKind::Weighted));
    std::vector<double> out(nl * nr);
    for (std::size_t l = 0; l < nl; ++l) {
      for (std::size_t r = 0; r < nr; ++r) out[l * nr + r] = route_value(c.routes[r], p, field.get(), c.levels[l], ladder, c);
    }
    return out;
  });

  for (std::size_t k = 0; k < c.paths; ++k) {
    json per{{"index", k}, {"seed", src.seed(k)}};
    for (std::size_t r = 0; r < nr; ++r) {
      json v = json::array();
      for (std::size_t l = 0; l < nl; ++l) v.push_back(values[k][l * nr + r]);
      per[to_string(c.routes[r])] = v;
    }
    rec.per_path.push_back(per);
  }
  json levels = json::array();
  for (std::size_t l = 0; l < nl; ++l) {
    json routes = json::object();
    for (std::size_t r = 0; r < nr; ++r) {
      routes[to_string(c.routes[r])] = mean_se_json(mean_se(column(values, l * nr + r)));
    }
    json deltas = json::array();
    for (std::size_t r1 = 0; r1 < nr; ++r1) {
      for (std::size_t r2 = r1 + 1; r2 < nr; ++r2) {
        const auto v1 = column(values, l * nr + r1);
        const auto v2 = column(values, l * nr + r2);
        std::vector<double> diff, rel;
        for (std::size_t k = 0; k < v1.size(); ++k) {
          diff.push_back(v1[k] - v2[k]);
          rel.push_back(std::abs(v1[k] - v2[k]) / std::abs(v2[k]));
        }
        const auto d = mean_se(diff);
        deltas.push_back({{"routes", std::string(to_string(c.routes[r1])) + " - " + to_string(c.routes[r2])},
                          {"mean", d.mean},
                          {"se", d.se},
                          {"median_relative", median(rel)}});
      }
    }
    levels.push_back({{"a", c.levels[l]}, {"routes", routes}, {"cross_route_delta", deltas}});
  }
  rec.ensemble = {{"eps_ladder", ladder}, {"levels", levels}};
  rec.wall_clock = budget.elapsed();
  return rec;
}

RunRecord cmd_localtime(const ExperimentConfig& c, const RunContext& ctx) {
  validate(c);
  const Budget budget(c.budget_seconds);
  prepare_out_dir(c, ctx);
  RunRecord rec;
  rec.command = "localtime";
  rec.config = c;
  const PathSource src(c);
  const auto grid = effective_grid(c);
  const std::size_t nl = c.levels.size();
  struct Row {
    double total, clamped;
    std::vector<double> at;
  };
  const auto rows = parallel_map<Row>(c.paths, ctx.threads, [&](std::size_t k) {
    budget.check("localtime");
    const auto p = src.path(k);
    const auto f = local_time(p, grid, c.field_kind);
    if (ctx.write_files) {
      auto os = open_out(c, indexed_name("localtime", k, ".csv"));
      write_field_csv(os, f);
      open_out(c, indexed_name("localtime", k, ".json")) << field_sidecar(f).dump(2) << '\n';
    }
    Row row{f.total(), f.clamped_fraction, {}};
    for (double a : c.levels) row.at.push_back(f.value_at(a));
    return row;
  });
  std::vector<std::vector<double>> at;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rec.per_path.push_back({{"index", k},
                            {"seed", src.seed(k)},
                            {"total", rows[k].total},
                            {"clamped_fraction", rows[k].clamped},
                            {"at_levels", rows[k].at}});
    rec.files.push_back(indexed_name("localtime", k, ".csv"));
    rec.files.push_back(indexed_name("localtime", k, ".json"));
    at.push_back(rows[k].at);
  }
  json levels = json::array();
  for (std::size_t l = 0; l < nl; ++l) levels.push_back({{"a", c.levels[l]}, {"value", mean_se_json(mean_se(column(at, l)))}});
  const double expected =
      c.field_kind == LocalTimeKind::Plain ? c.horizon : pow_nonneg(c.horizon, 2.0 * c.hurst);
  rec.ensemble = {{"kind", to_string(c.field_kind)}, {"h", grid.h()}, {"expected_total", expected}, {"levels", levels}};
  rec.wall_clock = budget.elapsed();
  return rec;
}

RunRecord cmd_hilbert(const ExperimentConfig& c, const RunContext& ctx) {
  validate(c);
  const Budget budget(c.budget_seconds);
  prepare_out_dir(c, ctx);
  RunRecord rec;
  rec.command = "hilbert";
  rec.config = c;
  const PathSource src(c);
  const auto grid = effective_grid(c);
  const auto rows = parallel_map<std::vector<double>>(c.paths, ctx.threads, [&](std::size_t k) {
    budget.check("hilbert");
    const auto p = src.path(k);
    auto cfun = hilbert_transform(field_function(local_time(p, grid, LocalTimeKind::Weighted)));
    for (auto& v : cfun.values()) v *= std::numbers::pi;
    if (ctx.write_files) {
      auto os = open_out(c, indexed_name("hilbert", k, ".csv"));
      write_function_csv(os, cfun);
    }
    std::vector<double> at;
    for (double a : c.levels) at.push_back(cfun.at(a));
    return at;
  });
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rec.per_path.push_back({{"index", k}, {"seed", src.seed(k)}, {"at_levels", rows[k]}});
    rec.files.push_back(indexed_name("hilbert", k, ".csv"));
  }
  json levels = json::array();
  for (std::size_t l = 0; l < c.levels.size(); ++l) {
    levels.push_back({{"a", c.levels[l]}, {"pi_hilbert_of_local_time", mean_se_json(mean_se(column(rows, l)))}});
  }
  rec.ensemble = {{"h", grid.h()}, {"levels", levels}};
  rec.wall_clock = budget.elapsed();
  return rec;
}

RunRecord cmd_qcov(const ExperimentConfig& c, const RunContext& ctx) {
  validate(c);
  if (!(c.hurst < 0.5)) field_error("H", "the quadratic covariation route needs H < 1/2");
  require_qcov_levels(c);
  const Budget budget(c.budget_seconds);
  RunRecord rec;
  rec.command = "qcov";
  rec.config = c;
  const PathSource src(c);
  const auto grid = effective_grid(c);
  const double eps = static_cast<double>(c.qcov_lag) * src.grid().dt();
  const std::size_t nl = c.levels.size();
  // identity, bouleau-yor qcov, bouleau-yor space side, then one per level
  const auto rows = parallel_map<std::vector<double>>(c.paths, ctx.threads, [&](std::size_t k) {
    budget.check("qcov");
    const auto p = src.path(k);
    std::vector<double> out;
    out.push_back(qcov(p, [](double x) { return x; }, eps));
    const auto by = bouleau_yor_check(
        p, [&](double x) { return bump_value(c.bump, x); }, [&](double x) { return bump_derivative(c.bump, x); }, eps,
        grid);
    out.push_back(by.qcov);
    out.push_back(by.space_side);
    for (double a : c.levels) out.push_back(qcov(p, [a](double x) { return std::log(std::abs(x - a)); }, eps));
    return out;
  });
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rec.per_path.push_back({{"index", k},
                            {"seed", src.seed(k)},
                            {"identity", rows[k][0]},
                            {"bouleau_yor", {rows[k][1], rows[k][2]}},
                            {"log_levels", std::vector<double>(rows[k].begin() + 3, rows[k].end())}});
  }
  json levels = json::array();
  for (std::size_t l = 0; l < nl; ++l) {
    levels.push_back({{"a", c.levels[l]}, {"qcov_log", mean_se_json(mean_se(column(rows, 3 + l)))}});
  }
  rec.ensemble = {{"lag", eps},
                  {"identity", mean_se_json(mean_se(column(rows, 0)))},
                  {"identity_expected", pow_nonneg(c.horizon, 2.0 * c.hurst)},
                  {"bouleau_yor_qcov", mean_se_json(mean_se(column(rows, 1)))},
                  {"bouleau_yor_space", mean_se_json(mean_se(column(rows, 2)))},
                  {"levels", levels}};
  rec.wall_clock = budget.elapsed();
  return rec;
}

// ---- verification suites ----

std::vector<Check> covariance_checks(std::size_t triples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> hu(0.05, 0.95);
  std::uniform_real_distribution<double> hs(0.55, 0.95);
  std::uniform_real_distribution<double> tu(1e-3, 10.0);
  std::size_t failures = 0;
  double worst_low = INFINITY, worst_high = INFINITY;
  double lo_min = INFINITY, lo_max = 0.0, up_min = INFINITY, up_max = 0.0;
  for (std::size_t k = 0; k < triples; ++k) {
    const HurstIndex h(hu(rng));
    double s = tu(rng), r = tu(rng);
    if (s < r) std::swap(s, r);
    if (s == r) continue;
    const auto st = pair_stats(h, s, r);
    const auto sw = rho2_sandwich(h, s, r);
    const double low_margin = st.rho2 / sw.lower - 1.0;
    const double high_margin = 1.0 - st.rho2 / sw.upper;
    worst_low = std::min(worst_low, low_margin);
    worst_high = std::min(worst_high, high_margin);
    if (low_margin < -1e-12 || high_margin < -1e-12) ++failures;
  }
  for (std::size_t k = 0; k < triples; ++k) {
    const HurstIndex h(hs(rng));
    double s = tu(rng), r = tu(rng);
    if (s < r) std::swap(s, r);
    if (s == r) continue;
    const auto g = covariance_gap_ratios(h, s, r);
    lo_min = std::min(lo_min, g.lower_gap);
    lo_max = std::max(lo_max, g.lower_gap);
    up_min = std::min(up_min, g.upper_gap);
    up_max = std::max(up_max, g.upper_gap);
  }
  std::vector<Check> out;
  out.push_back(make_check("covariance.rho2_sandwich", CheckKind::Assertion, failures == 0,
                           fmt("%g violations; smallest relative margins %.3g below, %.3g above", double(failures),
                               worst_low, worst_high),
                           {{"triples", triples}, {"seed", seed}, {"violations", failures}}));
  const bool bounded = lo_min > 0.0 && up_min > 0.0 && std::isfinite(lo_max) && std::isfinite(up_max);
  out.push_back(make_check("covariance.gap_ratios", CheckKind::Assertion, bounded,
                           fmt("lower gap in [%.4g, %.4g], ", lo_min, lo_max) +
                               fmt("upper gap in [%.4g, %.4g]", up_min, up_max),
                           {{"lower_min", lo_min},
                            {"lower_max", lo_max},
                            {"upper_min", up_min},
                            {"upper_max", up_max},
                            {"triples", triples},
                            {"seed", seed}}));
  return out;
}

std::vector<Check> mollifier_checks() {
  const MollifierFamily m;
  std::vector<Check> out;
  // Simpson on the bump, independent of the family's own quadrature
  const int panels = 20000;
  const double hstep = 2.0 / panels;
  double mass = m.zeta(0.0) + m.zeta(2.0);
  for (int i = 1; i < panels; ++i) mass += (i % 2 ? 4.0 : 2.0) * m.zeta(i * hstep);
  mass *= hstep / 3.0;
  out.push_back(make_check("mollifier.zeta_normalisation", CheckKind::Assertion, std::abs(mass - 1.0) <= 1e-10,
                           fmt("int zeta = 1 %+.3g, c = %.15g", mass - 1.0, m.normalizer()),
                           {{"mass", mass}, {"c", m.normalizer()}}));

  const auto xs = log_grid(1e-4, 10.0, 80);
  const std::vector<int> ns{2, 4, 8, 16, 32, 64, 128};
  const auto f1 = fit_g_n_envelope(m, ns, xs);
  const auto f2 = fit_g_n_prime_envelope(m, ns, xs);
  out.push_back(make_check("mollifier.g_n_envelope", CheckKind::Assertion, f1.pass,
                           fmt("fitted C %.4g against %.4g", f1.fitted_constant, m.envelope_constant()),
                           {{"fitted_constant", f1.fitted_constant}, {"worst_x", f1.worst_x}, {"worst_n", f1.worst_n}}));
  out.push_back(make_check("mollifier.g_n_prime_envelope", CheckKind::Assertion, f2.pass,
                           fmt("fitted C %.4g against %.4g", f2.fitted_constant, m.envelope_constant()),
                           {{"fitted_constant", f2.fitted_constant}, {"worst_x", f2.worst_x}, {"worst_n", f2.worst_n}}));

  bool conv = true;
  json g1 = json::array();
  double prev = INFINITY;
  for (int n : {2, 8, 32, 128}) {
    const double g = m.g_n(n, 1.0);
    g1.push_back(g);
    conv = conv && std::abs(g) < prev;
    prev = std::abs(g);
    for (double x : log_grid(2.0 / n * 1.001, 10.0, 40)) {
      conv = conv && std::abs(m.g_n(n, x) - std::log(x)) <= g_n_convergence_bound(n, x);
    }
  }
  out.push_back(make_check("mollifier.g_n_convergence", CheckKind::Assertion, conv,
                           "G_n(1) shrinks over n in {2,8,32,128}; |G_n - log| within its rate off zero",
                           {{"g_n_at_1", g1}}));

  bool cont = true;
  json jumps = json::array();
  for (double eps : {0.5, 0.1, 0.01}) {
    const auto v = f_eps_junction(eps);
    const auto d = f_eps_d1_junction(eps);
    const double jv = std::abs(v.inner - v.outer);
    const double jd = std::abs(d.inner - d.outer);
    cont = cont && jv <= 1e-12 * std::max(1.0, std::abs(v.outer)) && jd <= 1e-12 * std::max(1.0, std::abs(d.outer));
    jumps.push_back({{"eps", eps}, {"value_jump", jv}, {"derivative_jump", jd}});
  }
  out.push_back(make_check("mollifier.f_eps_c1", CheckKind::Assertion, cont, "F_eps and F_eps' continuous at eps",
                           {{"junctions", jumps}}));
  return out;
}

std::vector<Check> density_checks(unsigned threads) {
  DensitySuiteOptions opt;
  opt.threads = threads;
  const auto suite = run_density_suite(opt);
  std::vector<Check> out;
  for (const auto& r : suite.reports) {
    out.push_back(make_check("density." + r.lemma_id, CheckKind::Assertion, r.pass,
                             fmt("fitted constant %.4g, cap %g, ", r.fitted_constant, r.cap) +
                                 std::to_string(r.samples.size()) + " samples",
                             {{"fitted_constant", r.fitted_constant},
                              {"cap", std::isfinite(r.cap) ? json(r.cap) : json("inf")},
                              {"samples", r.samples.size()}}));
  }
  for (const auto& s : suite.slopes) {
    out.push_back(make_check("density.slope." + s.name, CheckKind::Assertion, s.pass,
                             fmt("slope %.4f against threshold %.4f", s.slope, s.threshold),
                             {{"x", s.x}, {"y", s.y}, {"slope", s.slope}, {"threshold", s.threshold}}));
  }
  return out;
}

double IdentitySides::relative() const noexcept { return std::abs(space_side - time_side) / std::abs(time_side); }

double IdentitySides::relative_opposite_sign() const noexcept {
  return std::abs(space_side - opposite_sign) / std::abs(opposite_sign);
}

IdentitySides occupation_identity(const SamplePath& path, const SpatialGrid& grid, const BumpSpec& bump) {
  const auto field = local_time(path, grid, LocalTimeKind::Weighted);
  const auto lt = field_function(field);
  const auto hl = hilbert_transform(lt);
  IdentitySides out;
  double space = 0.0;
  for (std::size_t k = 0; k < hl.size(); ++k) space += hl[k] * bump_value(bump, hl.x(k));
  out.space_side = std::numbers::pi * space * hl.h();

  // Hg on a grid wide enough for the bump and the whole path
  const auto [lo_it, hi_it] = std::minmax_element(path.values.begin(), path.values.end());
  const double lo = std::min(bump.center - 8.0 * bump.width, *lo_it - 1.0);
  const double hi = std::max(bump.center + 8.0 * bump.width, *hi_it + 1.0);
  const double step = bump.width / 50.0;
  const auto m = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
  const auto g = SampledFunction::tabulate(lo, lo + static_cast<double>(m - 1) * step, m,
                                           [&](double x) { return bump_value(bump, x); });
  const auto hg = hilbert_transform(g);
  const auto w = path.grid->ds2h_weights();
  double t = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) t += hg.at(path.values[i]) * w[i];
  out.time_side = -std::numbers::pi * t;
  out.opposite_sign = std::numbers::pi * t;
  return out;
}

namespace {

struct IdentityRow {
  double mass_error = 0.0;
  IdentitySides sides;
  std::vector<double> ti, hl, yamada, qlog;
  double onesided = 0.0;
  double q_identity = 0.0, by_q = 0.0, by_s = 0.0;
};

std::vector<Check> identity_checks(const ExperimentConfig& c, const RunContext& ctx, const Budget& budget,
                                   RunRecord& rec) {
  const PathSource src(c);
  const auto grid = effective_grid(c);
  const auto ladder = effective_ladder(c);
  const bool sub = c.hurst < 0.5;
  const double target_mass = pow_nonneg(c.horizon, 2.0 * c.hurst);
  const double lag = static_cast<double>(c.qcov_lag) * src.grid().dt();
  PvOptions opt;
  opt.floor_factor = effective_floor_factor(c);

  const auto rows = parallel_map<IdentityRow>(c.paths, ctx.threads, [&](std::size_t k) {
    budget.check("identities");
    const auto p = src.path(k);
    IdentityRow row;
    const auto field = local_time(p, grid, LocalTimeKind::Weighted);
    row.mass_error = std::abs(field.total() - target_mass);
    row.sides = occupation_identity(p, grid, c.bump);
    for (double a : c.levels) {
      const auto ti = pv_time_integral(p, a, ladder, opt);
      row.ti.push_back(ti.value);
      row.hl.push_back(hilbert_route_value(field, a, ladder));
      const auto plus = one_sided(p, a, Side::Plus, ladder, field, opt);
      const auto minus = one_sided(p, a, Side::Minus, ladder, field, opt);
      for (std::size_t r = 0; r < ladder.size(); ++r) {
        const double rel = std::abs(plus.rung_values[r] + minus.rung_values[r] - ti.rung_values[r]) /
                           std::max(std::abs(ti.rung_values[r]), 1e-300);
        row.onesided = std::max(row.onesided, rel);
      }
      row.yamada.push_back(yamada_f(p.values.back() - a) - yamada_f(-a) - 0.5 * ti.value);
      if (sub) row.qlog.push_back(qcov(p, [a](double x) { return std::log(std::abs(x - a)); }, lag));
    }
    if (sub) {
      row.q_identity = qcov(p, [](double x) { return x; }, lag);
      const auto by = bouleau_yor_check(
          p, [&](double x) { return bump_value(c.bump, x); }, [&](double x) { return bump_derivative(c.bump, x); },
          lag, grid);
      row.by_q = by.qcov;
      row.by_s = by.space_side;
    }
    return row;
  });

  // refinement n -> 2n, h -> h/2 on the same seeds
  ExperimentConfig fine = c;
  fine.steps = 2 * c.steps;
  fine.grid.h = grid.h() / 2.0;
  fine.grid.radius = grid.x_max();
  const PathSource fsrc(fine);
  const auto fgrid = effective_grid(fine);
  const auto frel = parallel_map<double>(c.paths, ctx.threads, [&](std::size_t k) {
    budget.check("identities refinement");
    return occupation_identity(fsrc.path(k), fgrid, c.bump).relative();
  });

  std::vector<Check> out;
  double worst_mass = 0.0;
  std::vector<double> rel, rel_opposite;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    worst_mass = std::max(worst_mass, r.mass_error);
    rel.push_back(r.sides.relative());
    rel_opposite.push_back(r.sides.relative_opposite_sign());
    rec.per_path.push_back({{"index", k},
                            {"seed", src.seed(k)},
                            {"mass_error", r.mass_error},
                            {"identity_space", r.sides.space_side},
                            {"identity_time", r.sides.time_side},
                            {"identity_relative_refined", frel[k]},
                            {"time_integral", r.ti},
                            {"hilbert_of_local_time", r.hl},
                            {"yamada_residual", r.yamada},
                            {"one_sided_worst", r.onesided}});
    if (sub) {
      rec.per_path.back()["qcov_identity"] = r.q_identity;
      rec.per_path.back()["qcov_log"] = r.qlog;
      rec.per_path.back()["bouleau_yor"] = {r.by_q, r.by_s};
    }
  }
  const double mass_tol = 1e-10 * std::max(1.0, target_mass);
  out.push_back(make_check("identities.weighted_total_mass", CheckKind::Assertion, worst_mass <= mass_tol,
                           fmt("max |total - t^{2H}| = %.3g (tolerance %.3g)", worst_mass, mass_tol),
                           {{"max_error", worst_mass}}));
  const double med = median(rel);
  const double med_fine = median(frel);
  out.push_back(make_check("identities.occupation_type_formula", CheckKind::Assertion, med <= 0.10,
                           fmt("median per-path relative residual %.4f (limit 0.10)", med),
                           {{"median_relative", med}}));
  out.push_back(make_check("identities.occupation_type_refinement", CheckKind::Assertion, med_fine < med,
                           fmt("median %.4f at n, %.4f at 2n with h/2", med, med_fine),
                           {{"median_relative", med}, {"median_relative_refined", med_fine}}));
  out.push_back(make_check("identities.occupation_type_opposite_sign", CheckKind::Diagnostic, true,
                           fmt("median relative residual %.4f with the +2H pi sign", median(rel_opposite)),
                           {{"median_relative", median(rel_opposite)}}));

  double worst_os = 0.0;
  for (const auto& r : rows) worst_os = std::max(worst_os, r.onesided);
  out.push_back(make_check("identities.one_sided_sum", CheckKind::Assertion, worst_os <= 0.10,
                           fmt("worst rung relative gap %.3g (limit 0.10)", worst_os), {{"worst_relative", worst_os}}));

  for (std::size_t l = 0; l < c.levels.size(); ++l) {
    const double a = c.levels[l];
    std::vector<double> ti, hl, ym, rrel;
    for (const auto& r : rows) {
      ti.push_back(r.ti[l]);
      hl.push_back(r.hl[l]);
      ym.push_back(r.yamada[l]);
      rrel.push_back(std::abs(r.ti[l] - r.hl[l]) / std::abs(r.hl[l]));
    }
    const std::string tag = "[a=" + fmt("%g", a) + "]";
    out.push_back(make_check("identities.route_consistency" + tag, CheckKind::Diagnostic, true,
                             fmt("median relative disagreement %.4f", median(rrel)),
                             {{"median_relative", median(rrel)},
                              {"time_integral", mean_se_json(mean_se(ti))},
                              {"hilbert_of_local_time", mean_se_json(mean_se(hl))}}));
    const auto y = mean_se(ym);
    const double z = y.se > 0.0 ? std::abs(y.mean) / y.se : (y.mean == 0.0 ? 0.0 : INFINITY);
    out.push_back(make_check("identities.yamada_mean_zero" + tag, CheckKind::Assertion, z <= 3.0,
                             fmt("mean %.4g, se %.3g, |z| %.2f", y.mean, y.se, z), mean_se_json(y)));
    if (sub) {
      std::vector<double> ql;
      for (const auto& r : rows) ql.push_back(r.qlog[l]);
      const auto mq = mean_se(ql);
      const auto mt = mean_se(ti);
      const double zq = z_score(mq, mt);
      out.push_back(make_check("identities.qcov_log_vs_time_integral" + tag, CheckKind::Assertion, zq <= 3.0,
                               fmt("qcov %.4f, time integral %.4f, z %.2f", mq.mean, mt.mean, zq),
                               {{"qcov", mean_se_json(mq)}, {"time_integral", mean_se_json(mt)}, {"z", zq}}));
    }
  }
  if (sub) {
    std::vector<double> qi, bq, bs;
    for (const auto& r : rows) {
      qi.push_back(r.q_identity);
      bq.push_back(r.by_q);
      bs.push_back(r.by_s);
    }
    const auto mi = mean_se(qi);
    const double relq = std::abs(mi.mean - target_mass) / target_mass;
    out.push_back(make_check("identities.qcov_identity", CheckKind::Assertion, relq <= 0.03,
                             fmt("mean %.4f against t^{2H} = %.4f (relative %.4f, limit 0.03)", mi.mean, target_mass,
                                 relq),
                             {{"qcov", mean_se_json(mi)}, {"expected", target_mass}}));
    const auto mbq = mean_se(bq);
    const auto mbs = mean_se(bs);
    const double zb = z_score(mbq, mbs);
    out.push_back(make_check("identities.bouleau_yor", CheckKind::Assertion, zb <= 3.0,
                             fmt("qcov %.5f, space side %.5f, z %.2f", mbq.mean, mbs.mean, zb),
                             {{"qcov", mean_se_json(mbq)}, {"space_side", mean_se_json(mbs)}, {"z", zb}}));
  }
  return out;
}

}  // namespace

RunRecord cmd_verify(Suite suite, const ExperimentConfig& c, const RunContext& ctx) {
  validate(c);
  if (suite != Suite::Bounds && c.hurst < 0.5) require_qcov_levels(c);
  const Budget budget(c.budget_seconds);
  RunRecord rec;
  rec.command = "verify";
  rec.suite = to_string(suite);
  rec.config = c;
  auto append = [&](std::vector<Check> v) {
    for (auto& x : v) rec.checks.push_back(std::move(x));
  };
  if (suite != Suite::Identities) {
    append(covariance_checks());
    budget.check("covariance checks");
    append(mollifier_checks());
    budget.check("mollifier checks");
    append(density_checks(ctx.threads));
    budget.check("density checks");
  }
  if (suite != Suite::Bounds) append(identity_checks(c, ctx, budget, rec));
  std::size_t failed = 0;
  for (const auto& ch : rec.checks) failed += ch.kind == CheckKind::Assertion && !ch.passed;
  rec.ensemble = {{"checks", rec.checks.size()}, {"failed_assertions", failed}};
  rec.wall_clock = budget.elapsed();
  return rec;
}

RunRecord run_command(const std::string& command, const std::string& suite, const ExperimentConfig& c,
                      const RunContext& ctx) {
  if (command == "sample") return cmd_sample(c, ctx);
  if (command == "pv") return cmd_pv(c, ctx);
  if (command == "localtime") return cmd_localtime(c, ctx);
  if (command == "hilbert") return cmd_hilbert(c, ctx);
  if (command == "qcov") return cmd_qcov(c, ctx);
  if (command == "verify") return cmd_verify(suite_from_string(suite), c, ctx);
  throw Error(Errc::Validation, "command: unknown command '" + command + "'");
}

RunRecord replay(const json& record, const RunContext& ctx) {
  if (!record.is_object() || !record.contains("command") || !record.contains("config")) {
    throw Error(Errc::Validation, "record: missing command or config");
  }
  const auto command = read_string(record.at("command"), "command");
  const std::string suite = record.contains("suite") ? read_string(record.at("suite"), "suite") : "";
  return run_command(command, suite, config_from_json(record.at("config")), ctx);
}

}  // namespace fbmpv
