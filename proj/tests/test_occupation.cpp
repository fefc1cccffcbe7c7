#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fbmpv/error.hpp"
#include "fbmpv/occupation.hpp"
#include "fbmpv/rng.hpp"
#include "fbmpv/stats.hpp"

using namespace fbmpv;

namespace {

GridPtr make_grid(double t, std::size_t n, double h) {
  return std::make_shared<const TimeGrid>(t, n, HurstIndex(h));
}

}  // namespace

TEST_CASE("spatial grid layout") {
  const auto g = SpatialGrid::covering(1.0, 0.25);
  CHECK(g.size() == 9);
  CHECK(g.center(4) == 0.0);
  CHECK(g.x_min() == -1.0);
  CHECK(g.x_max() == 1.0);
  CHECK(g.bin(0.1) == 4);
  CHECK(g.bin(0.13) == 5);
  CHECK(g.bin(-0.13) == 3);
  bool clamped = false;
  CHECK(g.bin(7.0, &clamped) == 8);
  CHECK(clamped);
  const auto d = SpatialGrid::default_for(1.0, 1000, HurstIndex(0.7));
  CHECK(d.h() == doctest::Approx(0.2));
  CHECK(d.x_max() >= 5.0);
}

TEST_CASE("zero path puts all occupation in the bin at zero") {
  const auto tg = make_grid(1.0, 100, 0.6);
  SamplePath p{tg, std::vector<double>(101, 0.0), 0, SamplerMethod::Cholesky};
  const auto g = SpatialGrid::covering(2.0, 0.1);
  const auto f = local_time(p, g, LocalTimeKind::Plain);
  CHECK(f.mass[g.bin(0.0)] * g.h() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(f.total() == doctest::Approx(1.0).epsilon(1e-13));
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (k != g.bin(0.0)) CHECK(f.mass[k] == 0.0);
  }
}

TEST_CASE("total mass invariants") {
  for (double hv : {0.2, 0.5, 0.8}) {
    const HurstIndex h(hv);
    const auto tg = make_grid(1.7, 777, hv);
    CirculantSampler cs(tg);
    for (std::uint64_t k = 0; k < 5; ++k) {
      const auto p = cs.sample(derive_seed(1, k));
      const auto g = SpatialGrid::default_for(1.7, 777, h);
      const auto fw = local_time(p, g, LocalTimeKind::Weighted);
      const auto fp = local_time(p, g, LocalTimeKind::Plain);
      CHECK(std::abs(fw.total() - std::pow(1.7, 2 * hv)) <= 1e-10);
      CHECK(std::abs(fp.total() - 1.7) <= 1e-10);
      for (double m : fw.mass) CHECK(m >= 0.0);
    }
  }
}

TEST_CASE("partial horizon") {
  const auto tg = make_grid(1.0, 200, 0.7);
  const auto p = CirculantSampler(tg).sample(4);
  const auto g = SpatialGrid::covering(5.0, 0.1);
  const auto f = local_time(p, g, LocalTimeKind::Weighted, 100);
  CHECK(f.horizon == doctest::Approx(0.5));
  CHECK(f.total() == doctest::Approx(std::pow(0.5, 1.4)).epsilon(1e-12));
}

TEST_CASE("reflected path gives the mirrored field exactly") {
  const auto tg = make_grid(1.0, 1000, 0.4);
  CirculantSampler cs(tg);
  const auto g = SpatialGrid::covering(4.0, 0.07);
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto p = cs.sample(derive_seed(2, k));
    const auto f = local_time(p, g, LocalTimeKind::Weighted);
    const auto r = local_time(reflected(p), g, LocalTimeKind::Weighted);
    for (std::size_t j = 0; j < g.size(); ++j) CHECK(r.mass[j] == f.mass[g.size() - 1 - j]);
  }
}

TEST_CASE("occupation check with constant and quadratic test functions") {
  const auto tg = make_grid(1.0, 2000, 0.6);
  CirculantSampler cs(tg);
  const auto g = SpatialGrid::covering(5.0, 0.05);
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto p = cs.sample(derive_seed(3, k));
    CHECK(occupation_check(p, g, [](double) { return 1.0; }, LocalTimeKind::Plain) <= 1e-10);
    CHECK(occupation_check(p, g, [](double) { return 1.0; }, LocalTimeKind::Weighted) <= 1e-10);
    // Phi = x^2: per-sample error |c^2 - B^2| <= h|B| + h^2/4, oracle is the direct Riemann sum
    const auto s = occupation_sides(p, g, [](double x) { return x * x; }, LocalTimeKind::Plain);
    double bound = 0.0;
    for (std::size_t i = 0; i < p.steps(); ++i) bound += (0.05 * std::abs(p.values[i]) + 0.05 * 0.05 / 4) * tg->dt();
    double riemann = 0.0;
    for (std::size_t i = 0; i < p.steps(); ++i) riemann += p.values[i] * p.values[i] * tg->dt();
    CHECK(s.time_side == doctest::Approx(riemann).epsilon(1e-13));
    CHECK(s.residual() <= bound);
  }
}

TEST_CASE("smooth occupation residual shrinks under refinement") {
  auto phi = [](double x) { return std::exp(-x * x); };
  double prev = INFINITY;
  for (std::size_t lvl = 0; lvl < 3; ++lvl) {
    const std::size_t n = 512u << lvl;
    const double h = 0.25 / static_cast<double>(1u << lvl);
    CirculantSampler cs(make_grid(1.0, n, 0.3));
    MeanAccumulator acc;
    for (std::uint64_t k = 0; k < 100; ++k) {
      acc.add(occupation_check(cs.sample(derive_seed(4, k)), SpatialGrid::covering(5.0, h), phi,
                               LocalTimeKind::Weighted));
    }
    CHECK(acc.mean() < prev);
    prev = acc.mean();
  }
}

TEST_CASE("interpolated field value") {
  LocalTimeField f{SpatialGrid(0.5, 2), {0, 1, 3, 1, 0}, LocalTimeKind::Weighted, 1, 0.5, 1, 0, 0};
  CHECK(f.value_at(0.0) == 3.0);
  CHECK(f.value_at(0.25) == doctest::Approx(2.0));
  CHECK(f.value_at(-1.0) == 0.0);
  CHECK(f.value_at(3.0) == 0.0);
}

TEST_CASE("coverage warning on clamped weight") {
  const auto tg = make_grid(1.0, 10, 0.5);
  SamplePath p{tg, std::vector<double>(11, 9.0), 0, SamplerMethod::Circulant};
  p.values[0] = 0.0;
  const auto f = local_time(p, SpatialGrid::covering(1.0, 0.5), LocalTimeKind::Plain);
  CHECK(f.clamped_fraction == doctest::Approx(0.9));
  CHECK(f.coverage_warning());
  CHECK(f.total() == doctest::Approx(1.0));
}

TEST_CASE("field export") {
  LocalTimeField f{SpatialGrid(0.5, 1), {0.25, 1.5, 0.25}, LocalTimeKind::Plain, 1, 0.5, 10, 99, 0};
  std::ostringstream os;
  write_field_csv(os, f);
  CHECK(os.str() == "x,mass\n-0.5,0.25\n0,1.5\n0.5,0.25\n");
  const auto j = field_sidecar(f);
  CHECK(j.at("kind") == "plain");
  CHECK(j.at("seed") == 99);
  CHECK(j.at("n") == 10);
}

TEST_CASE("local time modulus") {
  CHECK_THROWS_AS(lt_modulus_scaling(HurstIndex(0.5), 1, 0, {0.1}, 10, 1, 0.3), Error);
  CHECK_THROWS_AS(lt_modulus_scaling(HurstIndex(0.7), 1, 0, {0.1, 0.2}, 10, 1, 0.3), Error);
  // b = a gives exactly zero increments
  const auto tg = make_grid(1.0, 256, 0.75);
  const auto p = CirculantSampler(tg).sample(5);
  CHECK(weighted_local_time_at(p, 0.1, 0.05) - weighted_local_time_at(p, 0.1, 0.05) == 0.0);
  ModulusOptions opt;
  opt.steps = 256;
  const auto t = lt_modulus_scaling(HurstIndex(0.75), 1, 0, {0.2, 0.1}, 200, 7, 0.3, opt);
  CHECK(t.rows.size() == 2);
  CHECK(t.bounded());
  // deterministic for any thread count
  opt.threads = 3;
  const auto t3 = lt_modulus_scaling(HurstIndex(0.75), 1, 0, {0.2, 0.1}, 200, 7, 0.3, opt);
  CHECK(t3.rows[1].second_moment == t.rows[1].second_moment);
}
