#include <doctest.h>

#include "approx.h"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "fracspde/density_stats.h"
#include "fracspde/errors.h"

using namespace fracspde;

namespace {

const KernelTable& gauss_table() {
  static const KernelTable t = default_kernel_table({2.0, 0.0});
  return t;
}

std::vector<double> normal_fixture(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

}  // namespace

TEST_CASE("config digest") {
  CHECK(config_digest("") == "cbf29ce484222325");
  CHECK(config_digest("a") == "af63dc4c8601ec8c");
  CHECK(config_digest("{\"alpha\":2}") != config_digest("{\"alpha\":1.5}"));
}

TEST_CASE("ensembles: determinism, zero noise, failures") {
  const auto g = make_grid(0.5, 1.0 / 64, 2.0, 1.0 / 32);
  const MildScheme s(gauss_table(), g, InitialMeasure::dirac());
  ObservableSpec spec;
  spec.t = 0.5;
  spec.points = {0.0, 0.5};
  const auto zero = run_ensemble(s, DiffusionCoefficient::constant(0.0), spec, 5, 1);
  for (std::size_t p = 0; p < 5; ++p) {
    CHECK(zero.sample(p)[0] == s.j0()(g.row_at(0.5), g.node_at(0.0)));
    CHECK(zero.sample(p)[1] == s.j0()(g.row_at(0.5), g.node_at(0.5)));
  }
  const auto pam = DiffusionCoefficient::pam(1.0);
  const auto a = run_ensemble(s, pam, spec, 12, 7, {}, 1);
  const auto b = run_ensemble(s, pam, spec, 12, 7, {}, 3);
  CHECK(a.samples == b.samples);
  CHECK(a.failures() == 0);
  const auto c = run_ensemble(s, pam, spec, 12, 8);
  CHECK(a.samples != c.samples);

  const auto boom = run_ensemble(s, DiffusionCoefficient::pam(1e150), spec, 3, 1);
  CHECK(boom.failures() == 3);
  CHECK(std::isnan(boom.samples[0]));
  CHECK(boom.column(0).empty());

  spec.t = 0.3;  // not a grid time
  CHECK_THROWS_AS(run_ensemble(s, pam, spec, 2, 1), ContractError);
  CHECK_THROWS_AS(run_ensemble(s, pam, spec, 1, 1), ContractError);

  ObservableSpec inf;
  inf.kind = ObservableKind::infimum;
  inf.t = 0.5;
  const auto e = run_ensemble(s, pam, inf, 4, 7);
  const auto full = run_ensemble(s, pam, [] {
    ObservableSpec sp;
    sp.t = 0.5;
    for (int i = -16; i <= 16; ++i) sp.points.push_back(i / 32.0);
    return sp;
  }(), 4, 7);
  for (std::size_t p = 0; p < 4; ++p) {
    const auto row = full.sample(p);
    CHECK(e.sample(p)[0] == *std::min_element(row.begin(), row.end()));
  }
}

TEST_CASE("PAM ensemble mean at the heat kernel value") {
  const auto g = make_grid(1.0, 1.0 / 128, 3.0, 1.0 / 32);
  const MildScheme s(gauss_table(), g, InitialMeasure::dirac());
  ObservableSpec spec;
  spec.t = 1.0;
  spec.points = {0.0};
  const auto e = run_ensemble(s, DiffusionCoefficient::pam(1.0), spec, 400, 3);
  const auto v = e.column();
  double m = 0, m2 = 0;
  for (double x : v) {
    m += x;
    m2 += x * x;
  }
  m /= v.size();
  const double se = std::sqrt((m2 / v.size() - m * m) / v.size());
  CHECK(std::abs(m - 0.28209479177387814) < 4 * se);
}

TEST_CASE("kernel density estimates") {
  const auto z = normal_fixture(20000, 1);
  const auto est = kde(z, 1);
  CHECK(est.mass() == rel(1.0).epsilon(1e-3));
  const double at0 = kde_value(z, 1, est.bandwidth, std::vector<double>{0.0});
  CHECK(std::abs(at0 / (1.0 / std::sqrt(2 * std::numbers::pi)) - 1.0) < 0.1);
  for (double v : est.values) CHECK(v >= 0.0);

  const auto z2 = normal_fixture(4000, 2);
  const auto est2 = kde(z2, 2);
  CHECK(est2.mass() == rel(1.0).epsilon(1e-3));
  const auto z3 = normal_fixture(3000, 3);
  CHECK(kde(z3, 3).mass() == rel(1.0).epsilon(1e-3));

  CHECK_THROWS_AS(kde(std::vector<double>(200, 1.0), 1), ContractError);
  CHECK_THROWS_AS(kde(normal_fixture(50, 4), 1), ContractError);
  CHECK_THROWS_AS(kde(normal_fixture(400, 4), 4), ContractError);
}

TEST_CASE("small-ball probabilities and Wilson intervals") {
  const std::vector<double> eps = {1e-1, 1e-2, 1e-3};
  for (const auto& pr : small_ball(std::vector<double>(50, 0.5), eps)) CHECK(pr.p == 0.0);
  for (const auto& pr : small_ball({0.1, 0.2, 0.3}, {1.0})) CHECK(pr.p == 1.0);

  // Coverage of the Wilson interval for uniform samples, P(X < 0.1) = 0.1.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  int covered = 0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> v(200);
    for (double& x : v) x = u(rng);
    const auto pr = small_ball(v, {0.1})[0];
    covered += pr.lo <= 0.1 && 0.1 <= pr.hi;
  }
  CHECK(covered >= 0.92 * reps);

  std::vector<double> v(10000);
  for (double& x : v) x = u(rng);
  const auto curve = small_ball(v, {0.5, 0.2, 0.1, 0.05, 0.01});
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].p <= curve[i - 1].p);

  // log P = -(log 1/eps)^2 is concave decreasing; P = eps is linear; P = exp(-1/eps) ... convex pieces fail.
  auto make = [](std::vector<std::pair<double, double>> pts) {
    std::vector<Proportion> c;
    for (auto [e, p] : pts) {
      Proportion q;
      q.threshold = e;
      q.p = p;
      q.hits = p > 0 ? 1 : 0;
      q.n = 1;
      c.push_back(q);
    }
    return c;
  };
  std::vector<std::pair<double, double>> sq, convex;
  for (double e : {1e-1, 1e-2, 1e-3}) {
    sq.push_back({e, std::exp(-std::pow(std::log(1 / e), 2) / 10)});
    convex.push_back({e, std::pow(std::log(1 / e), -8.0)});
  }
  const auto d1 = log_log_shape(make(sq));
  CHECK(d1.decreasing);
  CHECK(d1.concave);
  CHECK(d1.finite_points == 3);
  const auto d2 = log_log_shape(make(convex));
  CHECK(d2.decreasing);
  CHECK_FALSE(d2.concave);
  const auto d3 = log_log_shape(make({{1e-1, 0.2}, {1e-2, 0.01}, {1e-3, 0.0}}));
  CHECK(d3.concave);
  CHECK(d3.finite_points == 2);
  const auto d4 = log_log_shape(make({{1e-1, 0.2}, {1e-2, 0.0}, {1e-3, 0.01}}));
  CHECK_FALSE(d4.decreasing);

  const auto det = det_sigma_smallball({2.0, 2.0, 2.0}, {1.0, 2.5});
  CHECK(det[0].p == 0.0);
  CHECK(det[1].p == 1.0);
}

TEST_CASE("negative moments") {
  const auto one = negative_moment(std::vector<double>(100, 1.0), {1.0, 2.0, 5.0});
  for (const auto& r : one) {
    CHECK(r.value == 1.0);
    CHECK(r.se == 0.0);
  }
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(1.0, 2.0);
  std::vector<double> v(20000);
  for (double& x : v) x = u(rng);
  const auto r = negative_moment(v, {1.0})[0];
  CHECK(std::abs(r.value - std::log(2.0)) < 3 * r.se);
  CHECK_FALSE(r.unstable);
  v[0] = -1.0;
  v[1] = 0.0;
  v[2] = 1e-9;
  const auto r2 = negative_moment(v, {1.0})[0];
  CHECK(r2.nonpositive_fraction == rel(2.0 / 20000));
  CHECK(r2.used == 19998);
  CHECK(r2.unstable);
}

TEST_CASE("t0 criterion") {
  const auto& tb = gauss_table();
  std::vector<double> s, y;
  for (int k = 1; k <= 100; ++k) s.push_back(k / 100.0);
  for (int k = -20; k <= 20; ++k) y.push_back(k / 10.0);
  CHECK(estimate_t0(DiffusionCoefficient::pam(1.0), InitialMeasure::dirac(), tb, s, y) == s.front());
  CHECK(std::isinf(estimate_t0(DiffusionCoefficient::pam(1.0), InitialMeasure::zero(), tb, s, y)));
  const auto gate = DiffusionCoefficient::custom([](double t, double, double) { return std::max(t - 0.5, 0.0); },
                                                 std::nullopt, 1.0, 1.0);
  CHECK(std::abs(estimate_t0(gate, InitialMeasure::dirac(), tb, s, y) - 0.5) <= 0.01 + 1e-12);
  // Refinement never moves t0 later by more than one old cell.
  std::vector<double> fine;
  for (int k = 1; k <= 400; ++k) fine.push_back(k / 400.0);
  CHECK(estimate_t0(gate, InitialMeasure::dirac(), tb, fine, y) <= estimate_t0(gate, InitialMeasure::dirac(), tb, s, y) + 0.01);
}

TEST_CASE("Hoelder fit") {
  const std::vector<double> lags = {1.0 / 512, 1.0 / 256, 1.0 / 128, 1.0 / 64, 1.0 / 32};
  auto synth = [&](std::size_t paths, unsigned seed) {
    const auto z = normal_fixture(paths * lags.size(), seed);
    std::vector<double> inc(z.size());
    for (std::size_t p = 0; p < paths; ++p)
      for (std::size_t l = 0; l < lags.size(); ++l) inc[p * lags.size() + l] = std::pow(lags[l], 0.3) * z[p * lags.size() + l];
    return inc;
  };
  const auto f1 = holder_fit(synth(1000, 1), lags);
  CHECK(f1.ci_lo <= 0.3);
  CHECK(f1.ci_hi >= 0.3);
  const auto f4 = holder_fit(synth(4000, 2), lags);
  const double ratio = (f4.ci_hi - f4.ci_lo) / (f1.ci_hi - f1.ci_lo);
  MESSAGE("CI width ratio for 4x paths: " << ratio);
  CHECK(ratio == rel(0.5).epsilon(0.15));
  CHECK_THROWS_AS(holder_fit(synth(10, 3), {1.0, 2.0}), ContractError);

  // No noise, smooth data: deterministic increments, slope about 1.
  const auto g = make_grid(0.5 + 1.0 / 32, 1.0 / 512, 3.0, 1.0 / 32);
  const MildScheme s(gauss_table(), g, InitialMeasure::indicator(-1.0, 1.0));
  const auto fit = holder_exponent(s, DiffusionCoefficient::constant(0.0), 0.5, 0.5,
                                   {1.0 / 256, 1.0 / 128, 1.0 / 64, 1.0 / 32}, 3, 1);
  CHECK(fit.slope > 0.25);
}
