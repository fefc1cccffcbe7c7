#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fbmpv/error.hpp"
#include "fbmpv/path_sampler.hpp"
#include "fbmpv/rng.hpp"
#include "fbmpv/stats.hpp"

using namespace fbmpv;

namespace {

GridPtr make_grid(double t, std::size_t n, double h) {
  return std::make_shared<const TimeGrid>(t, n, HurstIndex(h));
}

}  // namespace

TEST_CASE("time grid nodes and ds^{2H} weights") {
  const auto g = make_grid(0.7, 37, 0.33);
  CHECK(g->node(0) == 0.0);
  CHECK(g->node(37) == 0.7);
  for (std::size_t i = 0; i < 37; ++i) CHECK(g->node(i + 1) > g->node(i));
  double sum = 0.0;
  for (double w : g->ds2h_weights()) sum += w;
  CHECK(std::abs(sum - std::pow(0.7, 0.66)) <= 1e-14);
  const auto bm = make_grid(2.0, 8, 0.5);
  for (double w : bm->ds2h_weights()) CHECK(w == doctest::Approx(0.25).epsilon(1e-14));
  CHECK_THROWS_AS(TimeGrid(0.0, 4, HurstIndex(0.5)), Error);
  CHECK_THROWS_AS(TimeGrid(1.0, 0, HurstIndex(0.5)), Error);
}

TEST_CASE("seed derivation is injective over a block of indices") {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t k = 0; k < 100000; ++k) seeds.push_back(derive_seed(42, k));
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("normal source moments") {
  NormalSource z(5);
  MeanAccumulator acc;
  MeanAccumulator sq;
  for (int i = 0; i < 200000; ++i) {
    const double v = z();
    acc.add(v);
    sq.add(v * v);
  }
  CHECK(std::abs(acc.mean()) < 4 * acc.std_error());
  CHECK(std::abs(sq.mean() - 1.0) < 4 * sq.std_error());
}

TEST_CASE("fGn autocovariance") {
  CHECK(fgn_autocovariance(HurstIndex(0.5), 0.1, 0) == doctest::Approx(0.1));
  for (std::size_t k = 1; k < 10; ++k) CHECK(std::abs(fgn_autocovariance(HurstIndex(0.5), 0.1, k)) < 1e-14 * 0.1);
  CHECK(fgn_autocovariance(HurstIndex(0.75), 1.0, 1) == doctest::Approx(std::sqrt(2.0) - 1).epsilon(1e-14));
}

TEST_CASE("cholesky determinism and cap") {
  const auto g = make_grid(1.0, 50, 0.7);
  CholeskySampler cs(g);
  const auto a = cs.sample(123);
  const auto b = cs.sample(123);
  CHECK(a.values == b.values);
  CHECK(a.values[0] == 0.0);
  CHECK(a.method == SamplerMethod::Cholesky);
  CHECK(cs.sample(124).values != a.values);
  try {
    CholeskySampler big(make_grid(1.0, 100, 0.7), 64);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::GridTooLarge);
  }
}

TEST_CASE("cholesky Brownian endpoint variance") {
  const auto g = make_grid(1.0, 1, 0.5);
  CholeskySampler cs(g);
  MeanAccumulator sq;
  for (std::uint64_t k = 0; k < 100000; ++k) {
    const double v = cs.sample(derive_seed(1, k)).values[1];
    sq.add(v * v);
  }
  CHECK(std::abs(sq.mean() - 1.0) <= 0.02);
}

TEST_CASE("cholesky cross moment matches covariance") {
  const HurstIndex h(0.75);
  const auto g = make_grid(1.0, 2, 0.75);
  CholeskySampler cs(g);
  MeanAccumulator prod;
  for (std::uint64_t k = 0; k < 100000; ++k) {
    const auto p = cs.sample(derive_seed(2, k));
    prod.add(p.values[1] * p.values[2]);
  }
  CHECK(std::abs(prod.mean() - covariance(h, 0.5, 1.0)) <= 0.01);
}

TEST_CASE("circulant sampler basics") {
  const auto g = make_grid(1.0, 100, 0.75);
  CirculantSampler cs(g);
  CHECK(cs.embedding_size() == 256);
  CHECK(cs.min_eigenvalue() >= -1e-9 * cs.max_eigenvalue());
  const auto a = cs.sample(9);
  CHECK(a.values == cs.sample(9).values);
  CHECK(a.values[0] == 0.0);
  CHECK(a.values.size() == 101);
  const auto inc = increments(a);
  CHECK(inc.size() == 100);
  double sum = 0.0;
  for (double d : inc) sum += d;
  CHECK(sum == doctest::Approx(a.values[100]).epsilon(1e-12));
  // a single-step grid still embeds
  CirculantSampler one(make_grid(1.0, 1, 0.3));
  CHECK(one.sample(1).values.size() == 2);
}

TEST_CASE("increments of the zero path vanish") {
  SamplePath p{make_grid(1.0, 5, 0.5), std::vector<double>(6, 0.0), 0, SamplerMethod::Cholesky};
  for (double d : increments(p)) CHECK(d == 0.0);
}

TEST_CASE("circulant endpoint variance and lag-one correlation") {
  const HurstIndex h(0.75);
  const auto g = make_grid(1.0, 16, 0.75);
  CirculantSampler cs(g);
  MeanAccumulator end2;
  MeanAccumulator x00;
  MeanAccumulator x01;
  for (std::uint64_t k = 0; k < 100000; ++k) {
    const auto p = cs.sample(derive_seed(3, k));
    end2.add(p.values[16] * p.values[16]);
    const double d0 = p.values[1] - p.values[0];
    const double d1 = p.values[2] - p.values[1];
    x00.add(d0 * d0);
    x01.add(d0 * d1);
  }
  CHECK(std::abs(end2.mean() - 1.0) <= 0.01);
  CHECK(std::abs(x01.mean() / x00.mean() - (std::pow(2.0, 0.5) - 1)) <= 0.02);
}

TEST_CASE("Brownian circulant increments are uncorrelated") {
  const auto g = make_grid(1.0, 8, 0.5);
  CirculantSampler cs(g);
  MeanAccumulator lag[4];
  for (std::uint64_t k = 0; k < 50000; ++k) {
    const auto d = increments(cs.sample(derive_seed(4, k)));
    for (int l = 1; l < 4; ++l) lag[l].add(d[0] * d[l]);
  }
  for (int l = 1; l < 4; ++l) CHECK(std::abs(lag[l].mean()) < 4 * lag[l].std_error());
}

TEST_CASE("circulant and cholesky endpoints agree in law") {
  const auto g = make_grid(1.0, 1024, 0.75);
  CholeskySampler chol(g);
  CirculantSampler circ(g);
  std::vector<double> a;
  std::vector<double> b;
  for (std::uint64_t k = 0; k < 10000; ++k) {
    a.push_back(chol.sample(derive_seed(5, k)).values.back());
    b.push_back(circ.sample(derive_seed(6, k)).values.back());
  }
  const auto ks = ks_two_sample(a, b);
  MESSAGE("KS D=" << ks.statistic << " p=" << ks.p_value);
  CHECK(ks.p_value > 0.001);
}

TEST_CASE("self-similarity of the endpoint") {
  const double hv = 0.3;
  CirculantSampler small(make_grid(1.0, 64, hv));
  CirculantSampler large(make_grid(4.0, 64, hv));
  std::vector<double> a;
  std::vector<double> b;
  const double scale = std::pow(4.0, -hv);
  for (std::uint64_t k = 0; k < 10000; ++k) {
    a.push_back(small.sample(derive_seed(7, k)).values.back());
    b.push_back(scale * large.sample(derive_seed(8, k)).values.back());
  }
  CHECK(ks_two_sample(a, b).p_value > 0.001);
}

TEST_CASE("path csv export") {
  const auto g = make_grid(1.0, 4, 0.5);
  SamplePath p{g, {0.0, 0.1, -0.2, 1.0 / 3.0, 2.0}, 0, SamplerMethod::Circulant};
  std::ostringstream os;
  write_path_csv(os, p);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "s,value");
  int rows = 0;
  while (std::getline(is, line)) {
    const auto comma = line.find(',');
    const double v = std::stod(line.substr(comma + 1));
    CHECK(v == p.values[rows]);
    ++rows;
  }
  CHECK(rows == 5);
}

TEST_CASE("reflected path negates values") {
  const auto g = make_grid(1.0, 10, 0.6);
  const auto p = CirculantSampler(g).sample(3);
  const auto q = reflected(p);
  for (std::size_t i = 0; i < p.values.size(); ++i) CHECK(q.values[i] == -p.values[i]);
}

TEST_CASE("KS statistic basics") {
  std::vector<double> a{1, 2, 3, 4};
  CHECK(ks_two_sample(a, a).statistic == 0.0);
  CHECK(ks_two_sample({1, 2}, {3, 4}).statistic == 1.0);
  CHECK(kolmogorov_sf(0.0) == 1.0);
  // reference values of the Kolmogorov distribution
  CHECK(kolmogorov_sf(1.36) == doctest::Approx(0.0494).epsilon(1e-2));
  CHECK(kolmogorov_sf(1.63) == doctest::Approx(0.0098).epsilon(2e-2));
}
