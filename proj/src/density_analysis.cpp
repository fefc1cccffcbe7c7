#include "fbmpv/density_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fbmpv/error.hpp"
#include "fbmpv/parallel.hpp"
#include "fbmpv/stats.hpp"

namespace fbmpv {

namespace {

using boost::math::quadrature::gauss_kronrod;

struct Integral {
  double value = 0.0;
  double error = 0.0;
};

template <class F>
Integral integrate(F f, double lo, double hi, const QuadratureOptions& opt, const char* what) {
  if (!(hi > lo)) return {};
  Integral out;
  double l1 = 0.0;
  out.value = gauss_kronrod<double, 31>::integrate(f, lo, hi, opt.max_depth, opt.tol, &out.error, &l1);
  // The Kronrod estimate is pessimistic for nested rules whose inner values
  // carry adaptive noise, so failure is judged against the looser `accept`.
  if (!std::isfinite(out.value) || out.error > std::max(opt.accept, opt.tol) * std::max(l1, 1e-300)) {
    std::ostringstream os;
    os << what << ": achieved error " << out.error << " (L1 " << l1 << ", accept " << opt.accept << ")";
    throw Error(Errc::QuadratureNonConvergence, os.str());
  }
  return out;
}

// Nested 1-D rules over a rectangle; f(x, y).
template <class F>
Integral integrate2(F f, double x0, double x1, double y0, double y1, const QuadratureOptions& opt, const char* what) {
  double inner_err = 0.0;
  auto outer = integrate(
      [&](double x) {
        const auto in = integrate([&](double y) { return f(x, y); }, y0, y1, opt, what);
        inner_err = std::max(inner_err, in.error);
        return in.value;
      },
      x0, x1, opt, what);
  outer.error += inner_err * (x1 - x0);
  return outer;
}

// log|expm1(t)| without overflow for large t.
double log_abs_expm1(double t) {
  if (t > 30.0) return t + std::log1p(-std::exp(-t));
  return std::log(std::abs(std::expm1(t)));
}

double signum(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

// Quadratic form pieces of phi = exp(-Q)/(2 pi rho) around (a, b):
// Q(a+u, b+v) - Q(a, b) = ga u + gb v + A u^2 + 2B uv + C v^2.
struct Expansion {
  double log_norm;  // -log(2 pi rho)
  double q_ab;
  double ga, gb, A, B, C;
};

Expansion expand(const PairStats& st, double a, double b) {
  if (!(st.rho2 > 0.0)) throw Error(Errc::DegeneratePair, "rho2 == 0 (s == r)");
  const double inv = 1.0 / st.rho2;
  Expansion e{};
  e.log_norm = -std::log(2.0 * std::numbers::pi * st.rho());
  e.q_ab = 0.5 * inv * (st.var_r * a * a - 2.0 * st.mu * a * b + st.var_s * b * b);
  e.ga = inv * (st.var_r * a - st.mu * b);
  e.gb = inv * (st.var_s * b - st.mu * a);
  e.A = 0.5 * inv * st.var_r;
  e.B = -0.5 * inv * st.mu;
  e.C = 0.5 * inv * st.var_s;
  return e;
}

// phi(x, y) - phi(x, b) at x = a + u, y = b + v.
double diff_y(const Expansion& e, double u, double v) {
  const double q_xb = e.q_ab + e.ga * u + e.A * u * u;
  const double d = e.gb * v + e.C * v * v + 2.0 * e.B * u * v;
  return signum(-d) * std::exp(e.log_norm - q_xb + log_abs_expm1(-d));
}

// phi(x, y) - phi(a, y).
double diff_x(const Expansion& e, double u, double v) {
  const double q_ay = e.q_ab + e.gb * v + e.C * v * v;
  const double d = e.ga * u + e.A * u * u + 2.0 * e.B * u * v;
  return signum(-d) * std::exp(e.log_norm - q_ay + log_abs_expm1(-d));
}

double double_diff(const Expansion& e, double u, double v) {
  const double p = e.ga * u + e.A * u * u;
  const double q = e.gb * v + e.C * v * v;
  const double m = 2.0 * e.B * u * v;
  const double t1 = signum(-p) * signum(-q) * std::exp(e.log_norm - e.q_ab + log_abs_expm1(-p) + log_abs_expm1(-q));
  const double t2 = signum(-m) * std::exp(e.log_norm - e.q_ab - p - q + log_abs_expm1(-m));
  return t1 + t2;
}

double phi_at(const Expansion& e, double u, double v) {
  return std::exp(e.log_norm - e.q_ab - (e.ga * u + e.gb * v + e.A * u * u + 2.0 * e.B * u * v + e.C * v * v));
}

void require_order(double s, double r) {
  if (!(r > 0.0 && s > r)) throw Error(Errc::InvalidArgument, "need 0 < r < s");
}

}  // namespace

void BoundReport::add(BoundSample s) { samples.push_back(std::move(s)); }

void BoundReport::finalize() {
  fitted_constant = 0.0;
  bool finite = true;
  for (const auto& s : samples) {
    const double q = s.ratio();
    if (!std::isfinite(q)) finite = false;
    fitted_constant = std::max(fitted_constant, q);
  }
  pass = finite && !samples.empty() && fitted_constant <= cap;
}

void to_json(nlohmann::json& j, const BoundSample& s) {
  j = {{"H", s.hurst}, {"s", s.s},     {"r", s.r},     {"a", s.a},
       {"b", s.b},     {"lhs", s.lhs}, {"rhs", s.rhs}, {"ratio", s.ratio()}};
  for (const auto& [k, v] : s.extra) j["extra"][k] = v;
}

void write_jsonl(std::ostream& os, const BoundReport& r) {
  for (const auto& s : r.samples) {
    nlohmann::json j = s;
    j["lemma"] = r.lemma_id;
    os << j.dump() << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::vector<BoundReport>& reports) {
  os << "lemma,samples,fitted_constant,cap,pass\n";
  os.precision(10);
  for (const auto& r : reports) {
    os << r.lemma_id << ',' << r.samples.size() << ',' << r.fitted_constant << ',';
    if (std::isfinite(r.cap)) os << r.cap; else os << "inf";
    os << ',' << (r.pass ? "true" : "false") << '\n';
  }
}

BoundSample check_density_increment(const HurstIndex& h, double s, double r, double x, double y, double z,
                                    double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(Errc::InvalidArgument, "beta must lie in [0,1]");
  const auto st = pair_stats(h, s, r);
  if (!(st.rho2 > 0.0)) throw Error(Errc::DegeneratePair, "rho2 == 0 (s == r)");
  BoundSample out{h.value(), s, r, x, y, {{"x", x}, {"y", y}, {"z", z}, {"beta", beta}}};
  out.lhs = std::abs(pair_density(st, x, y) - pair_density(st, z, y));
  out.rhs = std::pow(st.var_r, 0.5 * beta) / std::pow(st.rho(), 1.0 + beta) * std::pow(std::abs(x - z), beta) *
            std::exp(-beta * y * y / (2.0 * st.var_r));
  return out;
}

BoundSample check_density_increment_y(const HurstIndex& h, double s, double r, double x, double y, double z,
                                      double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(Errc::InvalidArgument, "beta must lie in [0,1]");
  const auto st = pair_stats(h, s, r);
  if (!(st.rho2 > 0.0)) throw Error(Errc::DegeneratePair, "rho2 == 0 (s == r)");
  BoundSample out{h.value(), s, r, x, y, {{"x", x}, {"y", y}, {"z", z}, {"beta", beta}}};
  out.lhs = std::abs(pair_density(st, x, y) - pair_density(st, x, z));
  out.rhs = std::pow(st.var_s, 0.5 * beta) / std::pow(st.rho(), 1.0 + beta) * std::pow(std::abs(y - z), beta) *
            std::exp(-beta * x * x / (2.0 * st.var_s));
  return out;
}

double density_double_difference(const PairStats& st, double a, double b, double x, double y) {
  return double_diff(expand(st, a, b), x - a, y - b);
}

Lambda1Parts lambda1_parts(const HurstIndex& h, double s, double r, double a, double b,
                           const QuadratureOptions& opt) {
  require_order(s, r);
  const auto st = pair_stats(h, s, r);
  const auto e = expand(st, a, b);
  const double sd_s = std::sqrt(st.var_s);
  const double sd_r = std::sqrt(st.var_r);
  // Upper cut-offs: the x-profile of phi(., b) is centred at mu b / r^{2H}
  // with spread below s^H; likewise for y.
  const double u_hi = std::max(1.0, std::max(0.0, st.mu * b / st.var_r) + opt.tail_sd * sd_s - a);
  const double v_hi = std::max(1.0, std::max(0.0, st.mu * a / st.var_s) + opt.tail_sd * sd_r - b);

  Lambda1Parts out;
  auto add = [&](double& slot, const Integral& in) {
    slot = in.value;
    out.error += in.error;
  };
  add(out.corner,
      integrate2([&](double u, double v) { return std::abs(double_diff(e, u, v)) / (u * v); }, 0.0, 1.0, 0.0, 1.0,
                 opt, "Lambda_11"));
  add(out.right,
      integrate2([&](double u, double v) { return std::abs(diff_y(e, u, v)) / (u * v); }, 1.0, u_hi, 0.0, 1.0, opt,
                 "Lambda_12"));
  add(out.top,
      integrate2([&](double u, double v) { return std::abs(diff_x(e, u, v)) / (u * v); }, 0.0, 1.0, 1.0, v_hi, opt,
                 "Lambda_13"));
  add(out.far,
      integrate2([&](double u, double v) { return phi_at(e, u, v) / (u * v); }, 1.0, u_hi, 1.0, v_hi, opt,
                 "Lambda_14"));
  return out;
}

double lambda1_quadrature(const HurstIndex& h, double s, double r, double a, double b, double beta,
                          const QuadratureOptions& opt) {
  if (!(beta > 0.0 && beta < 1.0)) throw Error(Errc::InvalidArgument, "beta must lie in (0,1)");
  return lambda1_parts(h, s, r, a, b, opt).total();
}

double lambda1_envelope(const HurstIndex& h, double s, double r, double beta) {
  require_order(s, r);
  const double hv = h.value();
  return std::pow(s, 0.5 * beta * hv) / (std::pow(r, (1.0 + beta) * hv) * std::pow(s - r, (1.0 + beta) * hv));
}

// Lambda_3 uses u = eps w^2 to absorb the log singularity at the corner.
Lambda34 lambda34_quadrature(const HurstIndex& h, double s, double r, double a, double eps, double beta,
                             const QuadratureOptions& opt) {
  require_order(s, r);
  if (!(eps > 0.0 && eps < 1.0)) throw Error(Errc::InvalidArgument, "eps must lie in (0,1)");
  if (!(beta > 0.0 && beta < 1.0)) throw Error(Errc::InvalidArgument, "beta must lie in (0,1)");
  const auto st = pair_stats(h, s, r);
  const auto e = expand(st, a, a);
  const double k = std::log(eps) / eps;

  auto g = [&](double w) {
    const double u = eps * w * w;
    return (std::log(u) - k * u) * 2.0 * eps * w;
  };
  const auto l3 = integrate2(
      [&](double w1, double w2) { return g(w1) * g(w2) * phi_at(e, eps * w1 * w1, eps * w2 * w2); }, 0.0, 1.0, 0.0,
      1.0, opt, "Lambda_3");
  const auto l4 = integrate2(
      [&](double u, double v) { return (1.0 / u - k) * (1.0 / v - k) * std::abs(double_diff(e, u, v)); }, 0.0, eps,
      0.0, eps, opt, "Lambda_4");
  return {l3.value, l4.value};
}

double lambda3_envelope(const HurstIndex& h, double s, double r, double eps) {
  const double hv = h.value();
  return std::pow(s * r, -0.5 * hv) * std::pow(eps, hv);
}

double lambda4_envelope(const HurstIndex& h, double s, double r, double eps, double beta) {
  require_order(s, r);
  const double hv = h.value();
  const double le = std::log(eps);
  return std::pow(s, 0.5 * beta * hv) /
         (std::pow(r, (1.0 + 0.5 * beta) * hv) * std::pow(s - r, (1.0 + beta) * hv)) * std::pow(eps, beta) *
         (1.0 + le * le);
}

double log_weighted_density_integral(const HurstIndex& h, double s, double r, double a, double alpha,
                                     const QuadratureOptions& opt, double c) {
  require_order(s, r);
  if (!(alpha > 1.0 - h.value() && alpha < 1.0)) throw Error(Errc::InvalidArgument, "alpha must lie in (1-H, 1)");
  const auto st = pair_stats(h, s, r);
  const auto e = expand(st, a, a);
  // d/dx phi(x, a) = -phi (r^{2H} x - mu a) / rho^2 vanishes at x0 = mu a / r^{2H}.
  auto integrand = [&](double u) {
    const double x = a + u;
    const double dphi = phi_at(e, u, 0.0) * (st.var_r * x - st.mu * a) / st.rho2;
    return c * (1.0 + std::abs(std::log(u))) * std::abs(dphi);
  };
  const double kink = st.mu * a / st.var_r - a;
  const double u_hi = std::max(0.0, kink) + opt.tail_sd * std::sqrt(st.var_s);
  std::vector<double> cuts{0.0, u_hi};
  if (kink > 0.0 && kink < u_hi) cuts.push_back(kink);
  if (1.0 < u_hi) cuts.push_back(1.0);
  std::sort(cuts.begin(), cuts.end());

  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i];
    const double hi = cuts[i + 1];
    if (hi <= 1.0) {
      // u = w^2 removes the log singularity at u = 0
      total += integrate([&](double w) { return integrand(w * w) * 2.0 * w; }, std::sqrt(lo), std::sqrt(hi), opt,
                         "log-weighted density")
                   .value;
    } else {
      total += integrate(integrand, lo, hi, opt, "log-weighted density").value;
    }
  }
  return total;
}

double log_weighted_envelope(const HurstIndex& h, double s, double r, double alpha) {
  require_order(s, r);
  const double p = (1.0 + alpha) * h.value();
  return std::pow(s - r, -p) * std::pow(r, -p);
}

std::vector<ParameterPoint> parameter_sample(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  auto unit = [&eng] { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };
  const double levels[] = {-2.0, -0.5, 0.0, 0.5, 2.0};
  std::vector<ParameterPoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    ParameterPoint p{};
    p.hurst = 0.55 + 0.35 * unit();
    p.r = 0.1 + 0.8 * unit();
    p.s = p.r + (1.0 - p.r) * (0.05 + 0.95 * unit());
    p.a = levels[eng() % 5];
    p.b = levels[eng() % 5];
    out.push_back(p);
  }
  return out;
}

bool DensitySuite::pass() const noexcept {
  return std::all_of(reports.begin(), reports.end(), [](const BoundReport& r) { return r.pass; }) &&
         std::all_of(slopes.begin(), slopes.end(), [](const SlopeCheck& c) { return c.pass; });
}

namespace {

SlopeCheck make_slope(std::string name, std::vector<double> x, std::vector<double> y, double threshold) {
  SlopeCheck c{std::move(name), std::move(x), std::move(y)};
  c.slope = loglog_slope(c.x, c.y);
  c.threshold = threshold;
  c.pass = std::isfinite(c.slope) && c.slope >= threshold;
  return c;
}

struct PointResult {
  std::vector<BoundSample> inc_x, inc_y;
  BoundSample l1, l3, l4, logw;
};

}  // namespace

DensitySuite run_density_suite(const DensitySuiteOptions& opt) {
  const auto pts = parameter_sample(opt.points, opt.seed);
  const double beta = opt.beta;
  const double alpha = 0.5;

  const auto results = parallel_map<PointResult>(pts.size(), opt.threads, [&](std::size_t i) {
    const auto& p = pts[i];
    const HurstIndex h(p.hurst);
    PointResult out;
    for (double b : {0.0, 0.25, 0.5, 1.0}) {
      out.inc_x.push_back(check_density_increment(h, p.s, p.r, p.a, p.b, 0.5 * (p.a - p.b), b));
      out.inc_y.push_back(check_density_increment_y(h, p.s, p.r, p.a, p.b, 0.5 * (p.b - p.a), b));
    }
    out.l1 = {p.hurst, p.s, p.r, p.a, p.b, {{"beta", beta}}};
    out.l1.lhs = lambda1_quadrature(h, p.s, p.r, p.a, p.b, beta, opt.quad);
    out.l1.rhs = lambda1_envelope(h, p.s, p.r, beta);
    const auto l34 = lambda34_quadrature(h, p.s, p.r, p.a, opt.eps, beta, opt.quad);
    out.l3 = {p.hurst, p.s, p.r, p.a, p.a, {{"eps", opt.eps}}, l34.lambda3, lambda3_envelope(h, p.s, p.r, opt.eps)};
    out.l4 = {p.hurst, p.s, p.r, p.a, p.a, {{"eps", opt.eps}, {"beta", beta}}, l34.lambda4,
              lambda4_envelope(h, p.s, p.r, opt.eps, beta)};
    out.logw = {p.hurst, p.s, p.r, p.a, p.a, {{"alpha", alpha}}};
    out.logw.lhs = log_weighted_density_integral(h, p.s, p.r, p.a, alpha, opt.quad);
    out.logw.rhs = log_weighted_envelope(h, p.s, p.r, alpha);
    return out;
  });

  DensitySuite suite;
  auto named = [](const char* id, double cap = std::numeric_limits<double>::infinity()) {
    BoundReport r;
    r.lemma_id = id;
    r.cap = cap;
    return r;
  };
  auto inc_x = named("density_increment_x", 1.0);
  auto inc_y = named("density_increment_y", 1.0);
  auto l1 = named("lambda1");
  auto l3 = named("lambda3");
  auto l4 = named("lambda4");
  auto logw = named("log_weighted_density");
  for (const auto& res : results) {
    for (const auto& s : res.inc_x) inc_x.add(s);
    for (const auto& s : res.inc_y) inc_y.add(s);
    l1.add(res.l1);
    l3.add(res.l3);
    l4.add(res.l4);
    logw.add(res.logw);
  }
  for (auto* r : {&inc_x, &inc_y, &l1, &l3, &l4, &logw}) {
    r->finalize();
    suite.reports.push_back(*r);
  }

  // Scaling ladders at (H, r, a) = (0.75, 0.5, 0).
  const HurstIndex h(0.75);
  const double r = 0.5;
  const std::vector<double> gaps{0.2, 0.1, 0.05, 0.025};
  std::vector<double> l1v, lwv;
  for (double g : gaps) {
    l1v.push_back(lambda1_quadrature(h, r + g, r, 0.0, 0.0, beta, opt.quad));
    lwv.push_back(log_weighted_density_integral(h, r + g, r, 0.0, alpha, opt.quad));
  }
  suite.slopes.push_back(make_slope("lambda1_gap", gaps, l1v, -(1.0 + beta) * h.value() - 0.1));
  suite.slopes.push_back(make_slope("log_weighted_gap", gaps, lwv, -(1.0 + alpha) * h.value() - 0.1));

  const std::vector<double> epss{0.2, 0.1, 0.05, 0.025};
  std::vector<double> l3v, l4v;
  for (double e : epss) {
    const auto v = lambda34_quadrature(h, 2.0, 1.0, 0.0, e, beta, opt.quad);
    l3v.push_back(v.lambda3);
    l4v.push_back(v.lambda4);
  }
  auto l3c = make_slope("lambda3_eps", epss, l3v, h.value() - 0.1);
  auto l4c = make_slope("lambda4_eps", epss, l4v, beta - 0.15);
  // both must also shrink monotonically along the ladder
  for (std::size_t i = 1; i < epss.size(); ++i) {
    if (!(l3v[i] < l3v[i - 1])) l3c.pass = false;
    if (!(l4v[i] < l4v[i - 1])) l4c.pass = false;
  }
  suite.slopes.push_back(std::move(l3c));
  suite.slopes.push_back(std::move(l4c));
  return suite;
}

}  // namespace fbmpv
