#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fbmpv/error.hpp"
#include "fbmpv/parallel.hpp"
#include "fbmpv/path_sampler.hpp"
#include "fbmpv/pv_functional.hpp"
#include "fbmpv/rng.hpp"
#include "fbmpv/stats.hpp"

using namespace fbmpv;
using boost::math::quadrature::gauss_kronrod;

namespace {

GridPtr make_grid(double t, std::size_t n, double h) {
  return std::make_shared<const TimeGrid>(t, n, HurstIndex(h));
}

// Dawson's function exp(-x^2) int_0^x exp(u^2) du, written so the exponent
// never overflows.
double dawson(double x) {
  if (x == 0.0) return 0.0;
  auto f = [x](double u) { return std::exp((u - x) * (u + x)); };
  return gauss_kronrod<double, 61>::integrate(f, 0.0, x, 15, 1e-13);
}

// E v.p. 1/(X - a) for X ~ N(0, sigma^2).
double gaussian_pv_mean(double sigma, double a) {
  const double z = a / (std::numbers::sqrt2 * sigma);
  return -std::numbers::sqrt2 / sigma * dawson(z);
}

// E C_1(a): substituting u = s^{2H} removes H entirely.
double exact_mean_time_route(double a) {
  auto f = [a](double u) { return gaussian_pv_mean(std::sqrt(u), a); };
  return gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 15, 1e-12);
}

// Same quantity from Yamada's formula with zero-mean Skorohod term:
// E C_1(a) = 2 (E F(Z - a) - F(-a)), Z ~ N(0, 1).
double exact_mean_yamada_route(double a) {
  auto f = [a](double x) {
    return yamada_f(x - a) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  };
  const double lo = gauss_kronrod<double, 61>::integrate(f, -12.0, a, 15, 1e-13);
  const double hi = gauss_kronrod<double, 61>::integrate(f, a, 12.0, 15, 1e-13);
  return 2.0 * (lo + hi - yamada_f(-a));
}

}  // namespace

TEST_CASE("route names round trip") {
  for (Route r : {Route::TimeIntegral, Route::HilbertOfLocalTime, Route::QuadraticCovariation}) {
    CHECK(route_from_string(to_string(r)) == r);
  }
  CHECK_THROWS_AS(route_from_string("hilbert"), Error);
}

TEST_CASE("level far from the path: every rung is the plain Riemann sum") {
  const auto tg = make_grid(1.0, 1024, 0.7);
  const auto p = CirculantSampler(tg).sample(17);
  const double a = 10.0;
  double oracle = 0.0;
  const auto w = tg->ds2h_weights();
  for (std::size_t i = 0; i < w.size(); ++i) oracle += w[i] / (p.values[i] - a);
  const auto est = pv_time_integral(p, a, default_ladder_for(p));
  for (double r : est.rung_values) CHECK(r == doctest::Approx(oracle).epsilon(1e-13));
  CHECK(est.converged);
  CHECK(est.diag == 0.0);
}

TEST_CASE("reflection negates the functional exactly") {
  const auto tg = make_grid(1.0, 2048, 0.7);
  CirculantSampler cs(tg);
  const auto g = SpatialGrid::default_for(1.0, 2048, HurstIndex(0.7));
  for (std::uint64_t k = 0; k < 4; ++k) {
    const auto p = cs.sample(derive_seed(3, k));
    const auto q = reflected(p);
    const auto ladder = default_ladder_for(p);
    for (double a : {0.0, 0.3, -0.45}) {
      const auto e1 = pv_time_integral(p, a, ladder);
      const auto e2 = pv_time_integral(q, -a, ladder);
      for (std::size_t r = 0; r < ladder.size(); ++r) CHECK(e2.rung_values[r] == -e1.rung_values[r]);

      const auto fp = local_time(p, g, LocalTimeKind::Weighted);
      const auto fq = local_time(q, g, LocalTimeKind::Weighted);
      const auto plus = one_sided(p, a, Side::Plus, ladder, fp);
      const auto minus_refl = one_sided(q, -a, Side::Minus, ladder, fq);
      for (std::size_t r = 0; r < ladder.size(); ++r) {
        CHECK(minus_refl.rung_values[r] == doctest::Approx(-plus.rung_values[r]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("Brownian weights are the time steps") {
  const auto tg = make_grid(2.0, 500, 0.5);
  for (double w : tg->ds2h_weights()) CHECK(w == doctest::Approx(2.0 / 500).epsilon(1e-12));
}

TEST_CASE("plus and minus sides add up to the two-sided rungs") {
  const auto tg = make_grid(1.0, 4096, 0.7);
  CirculantSampler cs(tg);
  const auto g = SpatialGrid::default_for(1.0, 4096, HurstIndex(0.7));
  for (std::uint64_t k = 0; k < 6; ++k) {
    const auto p = cs.sample(derive_seed(11, k));
    const auto f = local_time(p, g, LocalTimeKind::Weighted);
    const auto ladder = default_ladder_for(p);
    const auto two = pv_time_integral(p, 0.2, ladder);
    const auto plus = one_sided(p, 0.2, Side::Plus, ladder, f);
    const auto minus = one_sided(p, 0.2, Side::Minus, ladder, f);
    for (std::size_t r = 0; r < ladder.size(); ++r) {
      CHECK(plus.rung_values[r] + minus.rung_values[r] ==
            doctest::Approx(two.rung_values[r]).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("one-sided pieces for a level below the whole path") {
  // Shift a sampled path up so it stays above a + eps_0.
  const auto tg = make_grid(1.0, 1024, 0.7);
  auto p = CirculantSampler(tg).sample(5);
  double lo = 0.0;
  for (double v : p.values) lo = std::min(lo, v);
  const double a = lo - 1.0;
  const auto g = SpatialGrid::covering(std::abs(a) + 4.0, 0.05);
  const auto f = local_time(p, g, LocalTimeKind::Weighted);
  CHECK(f.value_at(a) == 0.0);
  const auto ladder = default_ladder_for(p);
  const auto plus = one_sided(p, a, Side::Plus, ladder, f);
  const auto minus = one_sided(p, a, Side::Minus, ladder, f);
  const auto two = pv_time_integral(p, a, ladder);
  for (std::size_t r = 0; r < ladder.size(); ++r) {
    CHECK(plus.rung_values[r] == doctest::Approx(two.rung_values[r]).epsilon(1e-14));
    CHECK(minus.rung_values[r] == 0.0);
  }
}

TEST_CASE("ladder below the resolution floor is refused") {
  const auto tg = make_grid(1.0, 256, 0.7);
  const auto p = CirculantSampler(tg).sample(1);
  try {
    pv_time_integral(p, 0.0, {0.1, 0.01, 0.001});
    FAIL("expected LadderBelowResolution");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::LadderBelowResolution);
  }
  PvOptions opt;
  opt.floor_factor = 0.01;
  CHECK_NOTHROW(pv_time_integral(p, 0.0, {0.1, 0.01, 0.001}, opt));
}

TEST_CASE("field with one occupied bin") {
  const SpatialGrid g(0.01, 400);
  LocalTimeField f{g, std::vector<double>(g.size(), 0.0)};
  const std::size_t k = g.bin(1.5);
  f.mass[k] = 3.0;
  const double c = g.center(k);
  const double a = -0.5;
  const auto est = from_local_time(f, a, {0.2, 0.1, 0.05});
  const double one_term = 3.0 * g.h() / (c - a);
  for (double r : est.rung_values) CHECK(r == doctest::Approx(one_term).epsilon(1e-4));
  CHECK(est.limit == doctest::Approx(one_term).epsilon(1e-4));
}

TEST_CASE("local-time route at a bin centre passes the internal Hilbert check") {
  const auto tg = make_grid(1.0, 4096, 0.7);
  const auto p = CirculantSampler(tg).sample(77);
  const auto g = SpatialGrid::default_for(1.0, 4096, HurstIndex(0.7));
  const auto f = local_time(p, g, LocalTimeKind::Weighted);
  const double a = g.center(g.bin(0.25));
  const auto est = from_local_time(f, a, default_ladder_for(p));
  CHECK(std::isfinite(est.limit));
  const auto hf = hilbert_transform(field_function(f), HilbertMethod::Reference);
  CHECK(est.limit == doctest::Approx(std::numbers::pi * hf[g.bin(0.25)]).epsilon(1e-8));
  CHECK_THROWS_AS(from_local_time(f, g.x_max() + 1.0, {0.5, 0.25}), Error);
}

TEST_CASE("quadratic covariation preconditions and trivial cases") {
  const auto tg = make_grid(1.0, 512, 0.3);
  const auto p = CirculantSampler(tg).sample(9);
  const double dt = tg->dt();
  CHECK(qcov(p, [](double) { return 2.5; }, 4 * dt) == 0.0);
  try {
    qcov(p, [](double x) { return x; }, 2.5 * dt);
    FAIL("expected LagNotOnGrid");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::LagNotOnGrid);
  }
  const auto tg7 = make_grid(1.0, 512, 0.7);
  const auto p7 = CirculantSampler(tg7).sample(9);
  try {
    qcov(p7, [](double x) { return x; }, 4 * dt);
    FAIL("expected WrongRegime");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::WrongRegime);
  }
  const auto grid = SpatialGrid::covering(6.0, 0.02);
  const auto by = bouleau_yor_check(p, [](double) { return 0.0; }, [](double) { return 0.0; }, 4 * dt, grid);
  CHECK(by.qcov == 0.0);
  CHECK(by.space_side == 0.0);
  CHECK(by.residual() == 0.0);
}

TEST_CASE("identity covariation has mean t^{2H}") {
  // E (B_{s+e} - B_s)^2 = e^{2H}, so the mean telescopes to the weight sum
  // over s_i <= t - e, which is (t - e)^{2H}.
  const double hv = 0.3;
  const auto tg = make_grid(1.0, 1024, hv);
  CirculantSampler cs(tg);
  const double eps = 4 * tg->dt();
  const auto vals = parallel_map<double>(2000, 0, [&](std::size_t k) {
    return qcov(cs.sample(derive_seed(21, k)), [](double x) { return x; }, eps);
  });
  const auto m = mean_se(vals);
  const double expect = std::pow(1.0 - eps, 2 * hv);
  CHECK(std::abs(m.mean - expect) <= 3.0 * m.se);
}

TEST_CASE("exact mean oracle: two independent formulas agree") {
  for (double a : {0.25, 0.5, 1.0, -0.7}) {
    CHECK(exact_mean_time_route(a) == doctest::Approx(exact_mean_yamada_route(a)).epsilon(1e-8));
  }
  CHECK(exact_mean_time_route(0.5) == doctest::Approx(-1.0986).epsilon(1e-4));
}

TEST_CASE("time-integral ensemble mean matches the exact mean") {
  const double hv = 0.7;
  const std::size_t n = 2048;
  const auto tg = make_grid(1.0, n, hv);
  CirculantSampler cs(tg);
  for (double a : {0.5, 1.0}) {
    const auto vals = parallel_map<double>(2000, 0, [&](std::size_t k) {
      const auto p = cs.sample(derive_seed(31, k));
      return pv_time_integral(p, a, default_ladder_for(p)).value;
    });
    const auto m = mean_se(vals);
    const double exact = exact_mean_time_route(a);
    MESSAGE("a=" << a << " mean " << m.mean << " se " << m.se << " exact " << exact);
    CHECK(std::abs(m.mean - exact) <= 3.0 * m.se);
  }
}

TEST_CASE("Yamada residual") {
  const auto tg = make_grid(1.0, 512, 0.7);
  const auto p = CirculantSampler(tg).sample(2);
  PvOptions opt;
  opt.upto = 0;
  CHECK(yamada_residual(p, 0.5, default_ladder_for(p), opt) == 0.0);
  CHECK(yamada_f(0.0) == 0.0);
  CHECK(yamada_f(-1.0) == doctest::Approx(1.0));
  CHECK(yamada_f(std::exp(1.0)) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("continuity exponent case split") {
  CHECK(continuity_exponent(HurstIndex(0.6)) == 0.6);
  CHECK(continuity_exponent(HurstIndex(2.0 / 3.0)) == doctest::Approx(2.0 / 3.0));
  CHECK(continuity_exponent(HurstIndex(0.8)) == doctest::Approx(0.6));
  CHECK_THROWS_AS(continuity_exponent(HurstIndex(0.5)), Error);
}

TEST_CASE("continuity table is thread-count independent") {
  ContinuityOptions opt;
  opt.steps = 512;
  opt.threads = 1;
  const std::vector<std::pair<double, double>> pairs{{0.5, 1.0}, {0.75, 1.0}, {1.0, 1.0}};
  const auto t1 = continuity_modulus(HurstIndex(0.7), pairs, 64, 99, opt);
  opt.threads = 3;
  const auto t3 = continuity_modulus(HurstIndex(0.7), pairs, 64, 99, opt);
  REQUIRE(t1.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(t1.rows[i].second_moment == t3.rows[i].second_moment);
    CHECK(t1.rows[i].se == t3.rows[i].se);
  }
  CHECK(t1.rows[2].second_moment == 0.0);
}

TEST_CASE("functional sample JSON") {
  FunctionalSample s;
  s.hurst = 0.7;
  s.a = 0.5;
  s.t = 1.0;
  s.route = Route::HilbertOfLocalTime;
  s.estimate.value = 1.25;
  s.estimate.eps_ladder = {0.1, 0.05};
  s.estimate.rung_values = {1.0, 1.25};
  s.seed = 42;
  nlohmann::json j = s;
  CHECK(j.at("route") == "hilbert_of_local_time");
  CHECK(j.at("value") == 1.25);
  CHECK(j.at("seed") == 42);
  CHECK(j.at("rungs").size() == 2);
}
