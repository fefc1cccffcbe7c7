#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fbmpv/error.hpp"
#include "fbmpv/fbm_model.hpp"

using namespace fbmpv;
using boost::math::quadrature::gauss_kronrod;

namespace {

// Oracle: textbook bivariate normal density written out with std::pow and an
// explicit 2x2 inverse, independent of the library's factorised rho2.
double naive_pair_density(double h, double s, double r, double x, double y) {
  const double vs = std::pow(s, 2 * h);
  const double vr = std::pow(r, 2 * h);
  const double c = 0.5 * (vs + vr - std::pow(std::abs(s - r), 2 * h));
  const double det = vs * vr - c * c;
  const double q = (vr * x * x - 2 * c * x * y + vs * y * y) / det;
  return std::exp(-0.5 * q) / (2 * std::numbers::pi * std::sqrt(det));
}

template <class F>
double integrate(F f, double a, double b) {
  return gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

}  // namespace

TEST_CASE("hurst index validation and regime") {
  CHECK(HurstIndex(0.3).regime() == Regime::Sub);
  CHECK(HurstIndex(0.5).regime() == Regime::Brownian);
  CHECK(HurstIndex(0.7).regime() == Regime::Super);
  for (double bad : {0.0, 1.0, -0.1, 1.2, std::nan("")}) {
    try {
      HurstIndex h(bad);
      FAIL("accepted " << bad);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::InvalidArgument);
    }
  }
}

TEST_CASE("covariance examples") {
  CHECK(covariance(HurstIndex(0.5), 1, 2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(covariance(HurstIndex(0.75), 2, 2) == doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-14));
  CHECK(covariance(HurstIndex(0.75), 2, 1) == doctest::Approx(0.5 * std::pow(2.0, 1.5)).epsilon(1e-14));
  CHECK(covariance(HurstIndex(0.75), 0.5, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(covariance(HurstIndex(0.3), 0, 1.7) == 0.0);
}

TEST_CASE("pair stats examples") {
  const auto st = pair_stats(HurstIndex(0.75), 2, 1);
  CHECK(st.mu == doctest::Approx(1.414214).epsilon(1e-6));
  CHECK(st.rho2 == doctest::Approx(2 * std::sqrt(2.0) - 2).epsilon(1e-13));
  const auto bm = pair_stats(HurstIndex(0.5), 2, 1);
  CHECK(bm.mu == doctest::Approx(1.0));
  CHECK(bm.rho2 == doctest::Approx(1.0).epsilon(1e-14));
  for (double h : {0.1, 0.5, 0.9}) CHECK(pair_stats(HurstIndex(h), 1.3, 1.3).rho2 == 0.0);
}

TEST_CASE("rho2 keeps relative accuracy near the diagonal") {
  // (s-r)^{2H} r^{2H} sandwich scaling must survive s - r = 1e-9.
  const HurstIndex h(0.8);
  const double r = 1.0;
  const double s = 1.0 + 1e-9;
  const auto st = pair_stats(h, s, r);
  const auto sw = rho2_sandwich(h, s, r);
  CHECK(st.rho2 > 0.0);
  CHECK(st.rho2 >= sw.lower);
  CHECK(st.rho2 <= sw.upper);
}

TEST_CASE("phi kernel") {
  CHECK(phi_kernel(HurstIndex(0.75), 2, 1) == doctest::Approx(0.375).epsilon(1e-14));
  CHECK(phi_kernel(HurstIndex(0.75), 1, 1.25) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(phi_kernel(HurstIndex(0.6), 0, 1) == doctest::Approx(0.12).epsilon(1e-14));
  try {
    phi_kernel(HurstIndex(0.5), 1, 2);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::WrongRegime);
  }
  try {
    phi_kernel(HurstIndex(0.7), 1, 1);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SingularDiagonal);
  }
}

TEST_CASE("marginal density") {
  CHECK(marginal_density(HurstIndex(0.3), 1, 0) == doctest::Approx(1 / std::sqrt(2 * std::numbers::pi)));
  // std of B_4 at H = 0.75 is 4^{0.75} = 2.828...
  CHECK(marginal_density(HurstIndex(0.75), 4, 0) ==
        doctest::Approx(1 / (std::sqrt(2 * std::numbers::pi) * std::pow(4.0, 0.75))).epsilon(1e-14));
  CHECK(marginal_density(HurstIndex(0.75), 4, 0) == doctest::Approx(0.141047).epsilon(1e-6));
  const HurstIndex h(0.65);
  const double s = 2.5;
  const double sd = std::pow(s, 0.65);
  const double mass = integrate([&](double x) { return marginal_density(h, s, x); }, -10 * sd, 10 * sd);
  CHECK(std::abs(mass - 1.0) <= 1e-10);
}

TEST_CASE("pair density against naive oracle") {
  const auto st = pair_stats(HurstIndex(0.75), 2, 1);
  CHECK(pair_density(st, 0, 0) == doctest::Approx(0.174861).epsilon(1e-6));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> hu(0.05, 0.95);
  std::uniform_real_distribution<double> tu(0.1, 3.0);
  std::normal_distribution<double> xu(0.0, 1.5);
  for (int k = 0; k < 200; ++k) {
    const double h = hu(rng);
    const double s = tu(rng);
    const double r = tu(rng);
    if (std::abs(s - r) < 0.05) continue;
    const double x = xu(rng);
    const double y = xu(rng);
    const auto p = pair_stats(HurstIndex(h), s, r);
    CHECK(pair_density(p, x, y) == doctest::Approx(naive_pair_density(h, s, r, x, y)).epsilon(1e-9));
    // exchange (x, s) <-> (y, r)
    const auto q = pair_stats(HurstIndex(h), r, s);
    CHECK(pair_density(q, y, x) == doctest::Approx(pair_density(p, x, y)).epsilon(1e-12));
  }
}

TEST_CASE("pair density derivative matches central difference") {
  const auto st = pair_stats(HurstIndex(0.7), 1.8, 0.9);
  for (double x : {-1.0, 0.2, 1.3}) {
    for (double y : {-0.4, 0.8}) {
      const double d = 1e-5;
      const double fd = (pair_density(st, x + d, y) - pair_density(st, x - d, y)) / (2 * d);
      CHECK(pair_density_dx(st, x, y) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("pair density normalisation and marginalisation") {
  const HurstIndex h(0.75);
  const double s = 2;
  const double r = 1;
  const auto st = pair_stats(h, s, r);
  const double ls = 12 * std::pow(s, 0.75);
  const double lr = 12 * std::pow(r, 0.75);
  for (double x : {-1.0, 0.0, 0.7, 2.5}) {
    const double m = integrate([&](double y) { return pair_density(st, x, y); }, -lr, lr);
    CHECK(std::abs(m - marginal_density(h, s, x)) <= 1e-8);
  }
  const double total = integrate(
      [&](double x) {
        return integrate([&](double y) { return pair_density(st, x, y); }, -lr, lr);
      },
      -ls, ls);
  CHECK(std::abs(total - 1.0) <= 1e-8);
}

TEST_CASE("Brownian pair density factorises into increments") {
  const HurstIndex h(0.5);
  const auto st = pair_stats(h, 2, 1);
  for (double x : {-1.0, 0.3, 2.0}) {
    for (double y : {-0.5, 0.9}) {
      const double inc = marginal_density(h, 1, y) * marginal_density(h, 1, x - y);
      CHECK(pair_density(st, x, y) == doctest::Approx(inc).epsilon(1e-13));
    }
  }
}

TEST_CASE("pair density refuses a degenerate pair") {
  const auto st = pair_stats(HurstIndex(0.6), 1, 1);
  try {
    pair_density(st, 0, 0);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegeneratePair);
  }
}

TEST_CASE("psi correction") {
  const auto st = pair_stats(HurstIndex(0.75), 2, 1);
  CHECK(psi_correction(st, 0.3, -0.2, 0.3, -0.2) == 0.0);
  CHECK(psi_correction(st, 0, 0, 1.5, 1.2) == pair_density(st, 1.5, 1.2));
  // four-term formula with the naive density; all indicators are on
  const double h = 0.75;
  const double expect = naive_pair_density(h, 2, 1, 0.5, 0.5) - naive_pair_density(h, 2, 1, 0.5, 0) -
                        naive_pair_density(h, 2, 1, 0, 0.5) + naive_pair_density(h, 2, 1, 0, 0);
  CHECK(psi_correction(st, 0, 0, 0.5, 0.5) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(psi_correction(st, 0, 0, 0.5, 0.5) == doctest::Approx(0.0607450936).epsilon(1e-8));
}

TEST_CASE("property: covariance symmetric and Gram PSD on 64 times") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> hu(0.05, 0.95);
  std::uniform_real_distribution<double> tu(0.0, 5.0);
  for (int rep = 0; rep < 20; ++rep) {
    const HurstIndex h(hu(rng));
    std::vector<double> ts(64);
    for (auto& t : ts) t = tu(rng);
    Eigen::MatrixXd g(64, 64);
    for (int i = 0; i < 64; ++i) {
      for (int j = 0; j < 64; ++j) {
        g(i, j) = covariance(h, ts[i], ts[j]);
        CHECK(g(i, j) == covariance(h, ts[j], ts[i]));
      }
      CHECK(g(i, i) > 0.0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9 * g.trace());
  }
}

TEST_CASE("property: rho2 sandwich on 1e4 random triples") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> hu(0.05, 0.95);
  std::uniform_real_distribution<double> tu(1e-3, 10.0);
  int failures = 0;
  for (int k = 0; k < 10000; ++k) {
    const HurstIndex h(hu(rng));
    double s = tu(rng);
    double r = tu(rng);
    if (s < r) std::swap(s, r);
    if (s == r) continue;
    const auto st = pair_stats(h, s, r);
    const auto sw = rho2_sandwich(h, s, r);
    if (!(st.rho2 >= sw.lower * (1 - 1e-12) && st.rho2 <= sw.upper * (1 + 1e-12))) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("property: covariance gap ratios bounded away from zero and infinity") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> tu(1e-3, 10.0);
  for (double hv : {0.55, 0.65, 0.75, 0.85, 0.95}) {
    const HurstIndex h(hv);
    double lo_min = INFINITY, lo_max = 0, up_min = INFINITY, up_max = 0;
    for (int k = 0; k < 2000; ++k) {
      double s = tu(rng);
      double r = tu(rng);
      if (s < r) std::swap(s, r);
      if (s == r) continue;
      const auto g = covariance_gap_ratios(h, s, r);
      // oracle: the unnormalised definitions evaluated with std::pow
      const double mu = 0.5 * (std::pow(s, 2 * hv) + std::pow(r, 2 * hv) - std::pow(s - r, 2 * hv));
      const double lo_ref = (mu - std::pow(r, 2 * hv)) / ((s - r) * r * std::pow(s, 2 * hv - 2));
      const double up_ref = (std::pow(s, 2 * hv) - mu) / ((s - r) * std::pow(s, 2 * hv - 1));
      if (s - r > 1e-2 * s && r > 1e-2 * s) {
        CHECK(g.lower_gap == doctest::Approx(lo_ref).epsilon(1e-7));
        CHECK(g.upper_gap == doctest::Approx(up_ref).epsilon(1e-7));
      }
      lo_min = std::min(lo_min, g.lower_gap);
      lo_max = std::max(lo_max, g.lower_gap);
      up_min = std::min(up_min, g.upper_gap);
      up_max = std::max(up_max, g.upper_gap);
    }
    CHECK(lo_min > 0.0);
    CHECK(std::isfinite(lo_max));
    CHECK(up_min > 0.0);
    CHECK(std::isfinite(up_max));
    MESSAGE("H=" << hv << " lower in [" << lo_min << ", " << lo_max << "], upper in [" << up_min << ", "
                 << up_max << "]");
  }
}

TEST_CASE("property: sharpened Bernoulli inequality on [0,1]^2") {
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) {
      const double x = i / 100.0;
      const double a = j / 100.0;
      CHECK(power_inequality_margin(x, a) >= -1e-14);
    }
  }
}
