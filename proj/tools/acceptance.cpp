// Acceptance run: one PASS/FAIL line per criterion. Tolerances, seeds and
// time budgets are pinned below; --only N runs a single criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fbmpv/error.hpp"
#include "fbmpv/harness.hpp"
#include "fbmpv/occupation.hpp"
#include "fbmpv/parallel.hpp"
#include "fbmpv/path_sampler.hpp"
#include "fbmpv/pv_functional.hpp"
#include "fbmpv/pv_hilbert.hpp"
#include "fbmpv/rng.hpp"
#include "fbmpv/stats.hpp"

using namespace fbmpv;

namespace {

// 1
constexpr double kBudget1 = 1.0;
// 2
constexpr std::size_t kKsDraws = 10000;
constexpr double kKsMinP = 1e-3;
constexpr std::size_t kGramSteps = 64;
constexpr std::size_t kGramPaths = 100000;
constexpr double kGramSE = 3.0;
constexpr double kBudget2 = 60.0;
// 3
constexpr std::size_t kOccPaths = 100;
constexpr double kOccMassTol = 1e-10;
constexpr double kOccHalvingLow = 2.0 * 0.7;
constexpr double kOccHalvingHigh = 2.0 * 1.3;
constexpr double kBudget3 = 60.0;
// 4
constexpr double kLogPvTol = 1e-12;
constexpr double kLorentzTol = 1e-3;
constexpr double kIsometryTol = 0.01;
constexpr double kInverseTol = 5e-3;
constexpr double kBudget4 = 10.0;
// 5, 6
constexpr double kRouteHurst = 0.7;
constexpr std::size_t kRouteSteps = 4096;
constexpr std::size_t kRoutePaths = 200;
constexpr double kRouteLevel = 0.5;
constexpr double kRouteMedian = 0.10;
constexpr double kOneSidedTol = 0.10;
constexpr double kBudget5 = 120.0;
// 7
constexpr double kSubHurst = 0.3;
constexpr std::size_t kSubSteps = 2048;
constexpr std::size_t kSubPaths = 10000;
constexpr double kSubLevel = 0.5;
constexpr std::size_t kSubLag = 4;
constexpr double kSubFloorFactor = 0.1;
constexpr double kSubIdentityTol = 0.03;
constexpr double kSubZ = 3.0;
constexpr double kBudget7 = 300.0;
// 8
constexpr std::size_t kYamadaSteps = 4096;
constexpr std::size_t kYamadaPaths = 10000;
constexpr double kYamadaZ = 3.0;
constexpr double kBudget8 = 300.0;
// 9
constexpr std::size_t kModulusPaths = 10000;
constexpr double kModulusAlpha = 0.3;
constexpr double kBudget9 = 300.0;
// 10
constexpr double kBudget10 = 120.0;

struct Outcome {
  bool pass = false;
  std::string summary;
};

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

GridPtr time_grid(double hurst, std::size_t steps) {
  return std::make_shared<const TimeGrid>(1.0, steps, HurstIndex(hurst));
}

Outcome covariance_lemmas(unsigned) {
  const auto checks = covariance_checks(10000, kCovarianceSampleSeed);
  Outcome o{true, ""};
  for (const auto& c : checks) {
    o.pass = o.pass && c.passed;
    if (!o.summary.empty()) o.summary += "; ";
    o.summary += c.name + ": " + c.detail;
  }
  return o;
}

Outcome sampler_correctness(unsigned threads) {
  double worst_p = 1.0;
  for (double hv : {0.3, 0.7}) {
    const HurstIndex h(hv);
    const auto g = time_grid(hv, 256);
    const CholeskySampler chol(g);
    const CirculantSampler circ(g);
    const auto a = parallel_map<double>(kKsDraws, threads,
                                        [&](std::size_t k) { return chol.sample(derive_seed(101, k)).values.back(); });
    const auto b = parallel_map<double>(kKsDraws, threads,
                                        [&](std::size_t k) { return circ.sample(derive_seed(202, k)).values.back(); });
    worst_p = std::min(worst_p, ks_two_sample(a, b).p_value);
  }

  // Gram matrix of (B_{s_1}, ..., B_{s_n}); SE of each entry from Isserlis:
  // Var(X_i X_j) = S_ii S_jj + S_ij^2.
  const double hv = 0.7;
  const HurstIndex h(hv);
  const auto g = time_grid(hv, kGramSteps);
  const CirculantSampler circ(g);
  const std::size_t n = kGramSteps;
  const std::size_t chunks = 100;
  const std::size_t per = kGramPaths / chunks;
  const auto partial = parallel_map<std::vector<double>>(chunks, threads, [&](std::size_t c) {
    std::vector<double> acc(n * n, 0.0);
    for (std::size_t k = c * per; k < (c + 1) * per; ++k) {
      const auto p = circ.sample(derive_seed(303, k));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) acc[i * n + j] += p.values[i + 1] * p.values[j + 1];
      }
    }
    return acc;
  });
  std::vector<double> sum(n * n, 0.0);
  for (const auto& part : partial) {
    for (std::size_t e = 0; e < n * n; ++e) sum[e] += part[e];
  }
  double worst_z = 0.0;
  std::size_t outside = 0, entries = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double si = g->node(i + 1), sj = g->node(j + 1);
      const double exact = covariance(h, si, sj);
      const double var = covariance(h, si, si) * covariance(h, sj, sj) + exact * exact;
      const double se = std::sqrt(var / static_cast<double>(kGramPaths));
      const double z = std::abs(sum[i * n + j] / static_cast<double>(kGramPaths) - exact) / se;
      worst_z = std::max(worst_z, z);
      outside += z > kGramSE;
      ++entries;
    }
  }
  Outcome o;
  o.pass = worst_p > kKsMinP && outside == 0;
  o.summary = fmt("KS worst p %.3g (> %g); Gram max |z| %.2f; ", worst_p, kKsMinP, worst_z) +
              fmt("%g of %g entries beyond 3 SE", static_cast<double>(outside), static_cast<double>(entries));
  return o;
}

Outcome occupation_formula(unsigned threads) {
  const double hv = 0.3;
  const HurstIndex h(hv);
  auto phi = [](double x) { return std::exp(-x * x); };
  double worst_mass = 0.0;
  std::vector<double> mean_res;
  for (int lvl = 0; lvl < 3; ++lvl) {
    const std::size_t n = std::size_t{1024} << lvl;
    const auto g = time_grid(hv, n);
    const CirculantSampler circ(g);
    const double width = 2.0 * std::cbrt(1.0 / 1024.0) / static_cast<double>(1 << lvl);
    const auto grid = SpatialGrid::covering(5.0, width);
    const auto res = parallel_map<std::pair<double, double>>(kOccPaths, threads, [&](std::size_t k) {
      const auto p = circ.sample(derive_seed(404, k));
      const auto f = local_time(p, grid, LocalTimeKind::Weighted);
      return std::make_pair(std::abs(f.total() - 1.0), occupation_check(p, grid, phi, LocalTimeKind::Weighted));
    });
    MeanAccumulator acc;
    for (const auto& [m, r] : res) {
      worst_mass = std::max(worst_mass, m);
      acc.add(r);
    }
    mean_res.push_back(acc.mean());
  }
  const double r1 = mean_res[0] / mean_res[1];
  const double r2 = mean_res[1] / mean_res[2];
  auto halves = [](double r) { return r >= kOccHalvingLow && r <= kOccHalvingHigh; };
  Outcome o;
  o.pass = worst_mass <= kOccMassTol && halves(r1) && halves(r2);
  o.summary = fmt("max mass error %.2g; mean residual %.3g -> %.3g -> %.3g", worst_mass, mean_res[0], mean_res[1],
                  mean_res[2]) +
              fmt("; reduction factors %.2f, %.2f (required %.1f..%.1f)", r1, r2, kOccHalvingLow, kOccHalvingHigh);
  return o;
}

Outcome hilbert_module(unsigned) {
  double worst_log = 0.0;
  for (double c : {-0.7, 0.1, 0.5, 2.3}) {
    const double a = -1.0, b = 3.0;
    const auto one = SampledFunction::tabulate(a, b, 401, [](double) { return 1.0; });
    // pv_log_integral uses the kernel 1/(c - x), pv_limit 1/(x - c)
    worst_log = std::max(worst_log, std::abs(pv_log_integral(a, c, b) + pv_limit(one, c)));
  }
  auto lorentz = [](double x) { return 1.0 / (1.0 + x * x); };
  const auto f = SampledFunction::tabulate(-1000.0, 1000.0, 40001, lorentz);
  const auto hf = hilbert_transform(f, HilbertMethod::Fast);
  double worst_probe = 0.0;
  for (double x : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
    const double expected = -x / (1.0 + x * x);
    const double u = (x - f.x_min()) / f.h();
    const auto i = static_cast<std::size_t>(std::llround(u));
    worst_probe = std::max(worst_probe, std::abs(hf[i] - expected));
  }
  const double iso = std::abs(hf.l2_norm_squared() / f.l2_norm_squared() - 1.0);
  const auto back = hilbert_inverse(hf, HilbertMethod::Fast);
  double worst_inv = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) worst_inv = std::max(worst_inv, std::abs(back[i] - f[i]));
  Outcome o;
  o.pass = worst_log <= kLogPvTol && worst_probe <= kLorentzTol && iso <= kIsometryTol && worst_inv <= kInverseTol;
  o.summary = fmt("log PV err %.2g; Lorentzian probe err %.2g; isometry err %.3g; H^{-1}H sup err %.2g", worst_log,
                  worst_probe, iso, worst_inv);
  return o;
}

struct RouteRun {
  double median_rel = 0.0;
  double worst_one_sided = 0.0;
};

RouteRun route_run(std::size_t n, double width, unsigned threads) {
  const HurstIndex h(kRouteHurst);
  const auto g = time_grid(kRouteHurst, n);
  const CirculantSampler circ(g);
  const auto grid = SpatialGrid::covering(5.0, width);
  const auto rows = parallel_map<std::pair<double, double>>(kRoutePaths, threads, [&](std::size_t k) {
    const auto p = circ.sample(derive_seed(505, k));
    const auto lad = default_ladder_for(p);
    const auto ti = pv_time_integral(p, kRouteLevel, lad);
    const auto field = local_time(p, grid, LocalTimeKind::Weighted);
    const auto lt = from_local_time(field, kRouteLevel, lad);
    const auto plus = one_sided(p, kRouteLevel, Side::Plus, lad, field);
    const auto minus = one_sided(p, kRouteLevel, Side::Minus, lad, field);
    double worst = 0.0;
    for (std::size_t r = 0; r < lad.size(); ++r) {
      worst = std::max(worst, std::abs(plus.rung_values[r] + minus.rung_values[r] - ti.rung_values[r]) /
                                  std::abs(ti.rung_values[r]));
    }
    return std::make_pair(std::abs(ti.value - lt.value) / std::abs(lt.value), worst);
  });
  RouteRun out;
  std::vector<double> rel;
  for (const auto& [r, w] : rows) {
    rel.push_back(r);
    out.worst_one_sided = std::max(out.worst_one_sided, w);
  }
  out.median_rel = median(rel);
  return out;
}

RouteRun g_base, g_fine;
bool g_route_done = false;

void ensure_route_runs(unsigned threads) {
  if (g_route_done) return;
  const double width = SpatialGrid::default_for(1.0, kRouteSteps, HurstIndex(kRouteHurst)).h();
  g_base = route_run(kRouteSteps, width, threads);
  g_fine = route_run(2 * kRouteSteps, width / 2.0, threads);
  g_route_done = true;
}

Outcome route_consistency(unsigned threads) {
  ensure_route_runs(threads);
  Outcome o;
  o.pass = g_base.median_rel <= kRouteMedian && g_fine.median_rel < g_base.median_rel;
  o.summary = fmt("a=%.2f: median relative disagreement %.4f at n=%g, %.4f after n->2n, h->h/2", kRouteLevel,
                  g_base.median_rel, static_cast<double>(kRouteSteps), g_fine.median_rel);
  return o;
}

Outcome one_sided_decomposition(unsigned threads) {
  ensure_route_runs(threads);
  const double worst = std::max(g_base.worst_one_sided, g_fine.worst_one_sided);
  return {worst <= kOneSidedTol, fmt("worst rung relative gap of plus + minus vs two-sided %.3g (limit %.2f)", worst,
                                     kOneSidedTol)};
}

Outcome sub_half_routes(unsigned threads) {
  const HurstIndex h(kSubHurst);
  const auto g = time_grid(kSubHurst, kSubSteps);
  const CirculantSampler circ(g);
  const auto grid = SpatialGrid::covering(6.0, 0.02);
  const double eps = static_cast<double>(kSubLag) * g->dt();
  auto bump = [](double x) { return std::exp(-x * x); };
  auto dbump = [](double x) { return -2.0 * x * std::exp(-x * x); };
  PvOptions opt;
  opt.floor_factor = kSubFloorFactor;
  const auto rows = parallel_map<std::vector<double>>(kSubPaths, threads, [&](std::size_t k) {
    const auto p = circ.sample(derive_seed(707, k));
    const auto lad = default_ladder_for(p, kSubFloorFactor);
    const auto by = bouleau_yor_check(p, bump, dbump, eps, grid);
    return std::vector<double>{qcov(p, [](double x) { return x; }, eps),
                               qcov(p, [](double x) { return std::log(std::abs(x - kSubLevel)); }, eps),
                               pv_time_integral(p, kSubLevel, lad, opt).value, by.qcov, by.space_side};
  });
  std::vector<std::vector<double>> cols(5);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < 5; ++j) cols[j].push_back(r[j]);
  }
  const auto id = mean_se(cols[0]);
  const auto ql = mean_se(cols[1]);
  const auto ti = mean_se(cols[2]);
  const auto bq = mean_se(cols[3]);
  const auto bs = mean_se(cols[4]);
  const double rel = std::abs(id.mean - 1.0);
  const double zc = z_score(ql, ti);
  const double zb = z_score(bq, bs);
  Outcome o;
  o.pass = rel <= kSubIdentityTol && zc <= kSubZ && zb <= kSubZ;
  o.summary = fmt("qcov(identity) %.4f vs 1 (rel %.4f); qcov(log) %.4f vs time integral %.4f", id.mean, rel, ql.mean,
                  ti.mean) +
              fmt(" (z %.2f); Bouleau-Yor z %.2f", zc, zb);
  return o;
}

Outcome yamada(unsigned threads) {
  double worst = 0.0;
  std::string detail;
  bool pass = true;
  for (double hv : {0.6, 0.7, 0.8}) {
    const auto g = time_grid(hv, kYamadaSteps);
    const CirculantSampler circ(g);
    for (double a : {0.25, 0.5}) {
      const auto res = parallel_map<double>(kYamadaPaths, threads, [&](std::size_t k) {
        const auto p = circ.sample(derive_seed(808, k));
        return yamada_residual(p, a, default_ladder_for(p));
      });
      const auto m = mean_se(res);
      const double z = std::abs(m.mean) / m.se;
      worst = std::max(worst, z);
      pass = pass && z <= kYamadaZ;
      detail += fmt(" %.2f", z);
    }
  }
  return {pass, "|mean|/SE over (H,a) grid:" + detail + fmt(" (max %.2f, limit %.1f)", worst, kYamadaZ)};
}

Outcome moduli(unsigned threads) {
  const std::vector<double> gaps{0.2, 0.1, 0.05, 0.025};
  ModulusOptions mo;
  mo.steps = 2048;
  mo.threads = threads;
  const auto lt = lt_modulus_scaling(HurstIndex(0.75), 1.0, 0.0, gaps, kModulusPaths, 909, kModulusAlpha, mo);
  bool pass = lt.bounded() && lt.non_increasing();
  std::string s = "local time ratios";
  for (const auto& r : lt.rows) s += fmt(" %.3f", r.ratio);
  ContinuityOptions co;
  co.steps = 4096;
  co.threads = threads;
  std::vector<std::pair<double, double>> pairs;
  for (double g : gaps) pairs.emplace_back(1.0 - g, 1.0);
  for (double hv : {0.6, 0.8}) {
    const auto t = continuity_modulus(HurstIndex(hv), pairs, kModulusPaths, 910, co);
    pass = pass && t.bounded() && t.non_increasing();
    s += fmt("; C_t ratios H=%.1f:", hv);
    for (const auto& r : t.rows) s += fmt(" %.3f", r.ratio);
  }
  return {pass, s};
}

Outcome analysis_suite(unsigned threads) {
  auto checks = mollifier_checks();
  for (auto& c : density_checks(threads)) checks.push_back(std::move(c));
  // repeat for determinism
  auto again = mollifier_checks();
  for (auto& c : density_checks(threads)) again.push_back(std::move(c));
  std::size_t failed = 0;
  bool same = checks.size() == again.size();
  for (std::size_t i = 0; i < checks.size(); ++i) {
    failed += !checks[i].passed;
    if (same) {
      nlohmann::json a = checks[i], b = again[i];
      same = a == b;
    }
  }
  return {failed == 0 && same, fmt("%g checks, %g failed; identical on repeat: ", static_cast<double>(checks.size()),
                                    static_cast<double>(failed)) +
                                    (same ? "yes" : "no")};
}

Outcome reproducibility(unsigned) {
  const auto dir = std::filesystem::temp_directory_path() / "fbmpv_acceptance_replay";
  std::filesystem::remove_all(dir);
  struct Case {
    std::string command, suite;
    ExperimentConfig cfg;
  };
  ExperimentConfig sup;
  sup.hurst = 0.7;
  sup.steps = 2048;
  sup.paths = 64;
  sup.levels = {0.0, 0.5};
  sup.out_dir = (dir / "sup").string();
  ExperimentConfig sub = sup;
  sub.hurst = 0.3;
  sub.levels = {0.25, 0.5};
  sub.routes = {Route::TimeIntegral, Route::HilbertOfLocalTime, Route::QuadraticCovariation};
  sub.out_dir = (dir / "sub").string();
  const std::vector<Case> cases{{"sample", "", sup},       {"pv", "", sup},          {"pv", "", sub},
                                {"localtime", "", sup},    {"hilbert", "", sup},     {"qcov", "", sub},
                                {"verify", "identities", sup}, {"verify", "identities", sub}, {"verify", "bounds", sup}};
  std::size_t ok = 0;
  std::string failed;
  for (const auto& c : cases) {
    RunContext one;
    one.threads = 1;
    const auto rec = run_command(c.command, c.suite, c.cfg, one);
    const auto path = write_record(rec);
    std::ifstream is(path);
    const auto stored = nlohmann::json::parse(is);
    bool same = true;
    for (unsigned t : {2u, 4u}) {
      RunContext other;
      other.threads = t;
      other.write_files = false;
      same = same && same_numbers(stored, to_json(replay(stored, other)));
    }
    ok += same;
    if (!same) failed += (failed.empty() ? "" : ", ") + c.command + (c.suite.empty() ? "" : " " + c.suite);
  }
  return {ok == cases.size(), fmt("%g of %g records reproduced bit-for-bit from their snapshots at 2 and 4 threads",
                                  static_cast<double>(ok), static_cast<double>(cases.size())) +
                                  (failed.empty() ? "" : "; differing: " + failed)};
}

struct Criterion {
  int id;
  const char* name;
  double budget;
  std::function<Outcome(unsigned)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  unsigned threads = 1;
  app.add_option("--only", only, "run a single criterion")->check(CLI::Range(1, 11));
  app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "covariance lemmas", kBudget1, covariance_lemmas},
      {2, "sampler correctness", kBudget2, sampler_correctness},
      {3, "occupation formula", kBudget3, occupation_formula},
      {4, "Hilbert module", kBudget4, hilbert_module},
      {5, "route consistency", kBudget5, route_consistency},
      {6, "one-sided decomposition", kBudget5, one_sided_decomposition},
      {7, "H < 1/2 routes", kBudget7, sub_half_routes},
      {8, "Yamada residual", kBudget8, yamada},
      {9, "moduli", kBudget9, moduli},
      {10, "deterministic analysis suite", kBudget10, analysis_suite},
      {11, "reproducibility", 0.0, reproducibility},
  };
  int passed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(threads);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget == 0.0 || secs < c.budget;
    const bool ok = o.pass && in_time;
    passed += ok;
    std::printf("%s  [%2d] %s: %s; %.1f s%s\n", ok ? "PASS" : "FAIL", c.id, c.name, o.summary.c_str(), secs,
                in_time ? "" : fmt(" (budget %.0f s exceeded)", c.budget).c_str());
    std::fflush(stdout);
  }
  std::printf("acceptance: %d of %d criteria passed\n", passed, ran);
  return passed == ran ? 0 : 1;
}
