#include <doctest.h>

#include "approx.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fracspde/errors.h"
#include "fracspde/noise_initial.h"
#include "fracspde/special_fn.h"

using namespace fracspde;

namespace {

const KernelTable& gauss_table() {
  static const KernelTable t = default_kernel_table({2.0, 0.0});
  return t;
}

const KernelTable& stable_table() {
  static const KernelTable t = default_kernel_table({1.5, 0.0});
  return t;
}

std::vector<double> probes(double lo, double hi, int n) {
  std::vector<double> p;
  for (int i = 0; i <= n; ++i) p.push_back(lo + (hi - lo) * i / n);
  return p;
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("standard normals: moments, distribution, independence") {
  const NoiseKey key{12345, 7};
  const int n = 200000;
  std::vector<double> z(n);
  for (int i = 0; i < n; ++i) z[i] = standard_normal(key, static_cast<std::uint64_t>(i / 400), i % 400);
  double m1 = 0, m2 = 0, m4 = 0;
  for (double v : z) {
    m1 += v;
    m2 += v * v;
    m4 += v * v * v * v;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  CHECK(std::abs(m1) < 5.0 / std::sqrt(n));
  CHECK(std::abs(m2 - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(m4 - 3.0) < 5.0 * std::sqrt(96.0 / n));

  // Kolmogorov-Smirnov distance against the normal CDF.
  std::vector<double> s = z;
  std::sort(s.begin(), s.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = normal_cdf(s[i]);
    ks = std::max({ks, std::abs(f - double(i) / n), std::abs(f - double(i + 1) / n)});
  }
  CHECK(ks < 1.63 / std::sqrt(n));  // 1% level

  // Neighbouring cells in space, time and path index are uncorrelated.
  auto corr = [&](auto other) {
    double c = 0;
    for (int i = 0; i < 20000; ++i) c += standard_normal(key, i / 100, 2 * (i % 100)) * other(i);
    return c / 20000;
  };
  const double lim = 4.0 / std::sqrt(20000.0);
  CHECK(std::abs(corr([&](int i) { return standard_normal(key, i / 100, 2 * (i % 100) + 1); })) < lim);
  CHECK(std::abs(corr([&](int i) { return standard_normal(key, i / 100 + 1000, 2 * (i % 100)); })) < lim);
  CHECK(std::abs(corr([&](int i) { return standard_normal({12345, 8}, i / 100, 2 * (i % 100)); })) < lim);
  CHECK(std::abs(corr([&](int i) { return standard_normal({12346, 7}, i / 100, 2 * (i % 100)); })) < lim);
}

TEST_CASE("materialized paths match the stateless accessor") {
  const auto g = make_grid(0.25, 1.0 / 64, 1.0, 1.0 / 16);
  const auto p = sample_noise(99, 3, g);
  const auto q = sample_noise(99, 3, g);
  CHECK(p.increments.values() == q.increments.values());
  for (std::size_t k = 0; k < g.n_t; ++k)
    for (std::size_t j = 0; j < g.n_x; ++j)
      CHECK(p.increments(k, j) == noise_increment(p.key, k, j, g.dt, g.dx));
  const auto r = sample_noise(99, 4, g);
  CHECK(p.increments.values() != r.increments.values());
}

TEST_CASE("measure construction and sign checks") {
  const auto d = InitialMeasure::dirac();
  const auto leb = InitialMeasure::lebesgue();
  CHECK(d.kind() == InitialMeasure::Kind::dirac);
  CHECK(leb.kind() == InitialMeasure::Kind::density);
  CHECK((d + leb).kind() == InitialMeasure::Kind::combination);
  CHECK(InitialMeasure::zero().kind() == InitialMeasure::Kind::zero);
  CHECK(InitialMeasure::indicator(-1, 1, 2.0).density_at(0.5) == 2.0);
  CHECK(InitialMeasure::indicator(-1, 1, 2.0).density_at(1.5) == 0.0);

  CHECK(dominates(d + leb, d));
  CHECK(dominates(d + leb, leb));
  CHECK_FALSE(dominates(d, d + leb));
  CHECK_FALSE(dominates(leb, d));  // a density never dominates an atom
  CHECK(dominates(leb, InitialMeasure::indicator(-3, 3)));
  CHECK_FALSE(dominates(InitialMeasure::indicator(-3, 3), InitialMeasure::indicator(-2, 4)));
  CHECK(dominates(InitialMeasure::dirac(0.5, 2.0), InitialMeasure::dirac(0.5, 1.0)));
  CHECK_THROWS_AS(InitialMeasure::indicator(1, 1), DomainError);
  CHECK_THROWS_AS(InitialMeasure::dirac(0.0, NAN), DomainError);
}

TEST_CASE("admissibility diagnostic") {
  const auto grid = probes(-50, 50, 200);
  for (double alpha : {2.0, 1.5}) {
    CAPTURE(alpha);
    CHECK(check_admissible(InitialMeasure::dirac(), {alpha, 0.0}, grid).admissible);
    CHECK(check_admissible(InitialMeasure::lebesgue(), {alpha, 0.0}, grid).admissible);
    CHECK(check_admissible(InitialMeasure::indicator(-2, 3) + InitialMeasure::dirac(1.0), {alpha, 0.0}, grid)
              .admissible);
    std::vector<DiracAtom> heavy;
    for (int n = 1; n <= 26; ++n) heavy.push_back({double(n), std::exp(double(n) * n)});
    const auto rep = check_admissible(InitialMeasure::atoms(heavy), {alpha, 0.0}, grid);
    CHECK_FALSE(rep.admissible);
    CHECK_FALSE(rep.reason.empty());
  }
  // Lebesgue sup = int dz / (1 + |z|^{2.5}), attained everywhere.
  const auto leb = check_admissible(InitialMeasure::lebesgue(), {1.5, 0.0}, grid);
  CHECK(leb.sup_value == rel(2.0 * (std::numbers::pi / 2.5) / std::sin(std::numbers::pi / 2.5)));
  const auto g = check_admissible(InitialMeasure::lebesgue(), {2.0, 0.0}, grid);
  CHECK(g.gaussian_moments[2] == rel(std::sqrt(std::numbers::pi / 0.01)));

  // Monotone under domination.
  const auto small = InitialMeasure::indicator(-1, 1) + InitialMeasure::dirac(4.0, 0.5);
  const auto big = small + InitialMeasure::dirac(-3.0) + InitialMeasure::indicator(0, 5, 0.3);
  for (double alpha : {2.0, 1.5}) {
    const auto a = check_admissible(small, {alpha, 0.0}, grid);
    const auto b = check_admissible(big, {alpha, 0.0}, grid);
    CHECK(a.sup_value <= b.sup_value);
    for (int c = 0; c < 3; ++c) CHECK(a.gaussian_moments[c] <= b.gaussian_moments[c]);
  }
}

TEST_CASE("J0 for atoms, Lebesgue and indicators") {
  const auto& tb = gauss_table();
  CHECK(j0_value(InitialMeasure::lebesgue(), tb, 0.3, 1.7) == rel(1.0).epsilon(1e-12));
  CHECK(j0_value(InitialMeasure::dirac(0.5, 2.0), tb, 0.3, 1.1) ==
        rel(2.0 * gaussian_kernel(0.3, 0.6)).epsilon(1e-8));
  // Indicator: Phi((x-a)/sqrt(2t)) - Phi((x-b)/sqrt(2t)) for the heat kernel,
  // including far tails where both CDF values are near 1.
  for (double x : {-6.0, -1.0, 0.2, 1.0, 3.0, 8.0}) {
    for (double t : {0.05, 0.5, 1.0}) {
      CAPTURE(x);
      CAPTURE(t);
      const double s = std::sqrt(2.0 * t);
      const double exact = x > 0 ? normal_ccdf((x - 1.0) / s) - normal_ccdf((x + 1.0) / s)
                                 : normal_cdf((x + 1.0) / s) - normal_cdf((x - 1.0) / s);
      const double got = j0_value(InitialMeasure::indicator(-1, 1), tb, t, x);
      CHECK(std::abs(got - exact) <= 1e-6 * exact + 2e-12);
    }
  }
  // alpha = 1.5 indicator against direct quadrature of the kernel.
  const auto& st = stable_table();
  for (double x : {-2.0, 0.0, 0.7, 5.0}) {
    const double t = 0.4;
    const double q = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double y) { return kernel_value(st, t, x - y); }, -1.0, 1.0, 10, 1e-12);
    CHECK(j0_value(InitialMeasure::indicator(-1, 1), st, t, x) == rel(q).epsilon(1e-6));
  }
  // Linearity.
  const auto mu = InitialMeasure::dirac(0.3) + InitialMeasure::indicator(-2, 0.5, 0.7).scaled(2.0);
  const double lhs = j0_value(mu, st, 0.2, 0.1);
  const double rhs = j0_value(InitialMeasure::dirac(0.3), st, 0.2, 0.1) +
                     2.0 * j0_value(InitialMeasure::indicator(-2, 0.5, 0.7), st, 0.2, 0.1);
  CHECK(lhs == rel(rhs).epsilon(1e-13));
  CHECK_THROWS_AS(j0_value(mu, st, 0.0, 0.0), DomainError);
}

TEST_CASE("J0 squared cell averages") {
  const auto& tb = gauss_table();
  const auto g = make_grid(0.25, 1.0 / 64, 1.0, 1.0 / 16);
  const auto gsq = g_squared_field(tb, g);
  const auto d = j0_squared_field(InitialMeasure::dirac(), tb, g);
  for (std::size_t k = 0; k < g.n_t; ++k)
    for (std::size_t i = 0; i < g.n_x; ++i) CHECK(d(k, i) == rel(gsq(k, i)).epsilon(2e-6));
  const auto l = j0_squared_field(InitialMeasure::lebesgue(2.0), tb, g);
  for (double v : l.values()) CHECK(v == rel(4.0).epsilon(1e-12));

  // (1 + G)^2 for delta_0 + Lebesgue, heat kernel: averages of 1, 2G, G^2 in closed form.
  const auto mu = InitialMeasure::dirac() + InitialMeasure::lebesgue();
  const auto c = j0_squared_field(mu, tb, g);
  using boost::math::quadrature::gauss_kronrod;
  for (std::size_t k : {1u, 3u, 15u}) {
    for (std::size_t i : {8u, 12u, 16u}) {
      const double xc = g.x(i), h = 0.5 * g.dx;
      auto integrand = [&](double s) {
        const double r = std::sqrt(2.0 * s);
        const double m1 = normal_cdf((xc + h) / r) - normal_cdf((xc - h) / r);
        const double m2 = (normal_cdf((xc + h) / std::sqrt(s)) - normal_cdf((xc - h) / std::sqrt(s))) /
                          std::sqrt(8.0 * std::numbers::pi * s);
        return (2.0 * h + 2.0 * m1 + m2) / (2.0 * h);
      };
      const double exact =
          gauss_kronrod<double, 31>::integrate(integrand, k * g.dt, (k + 1) * g.dt, 10, 1e-12) / g.dt;
      CAPTURE(k);
      CAPTURE(i);
      CHECK(c(k, i) == rel(exact).epsilon(1e-6));
    }
  }
  // First row is an upper bound.
  for (std::size_t i = 0; i < g.n_x; ++i) CHECK(c(0, i) >= 1.0 + gsq(0, i));
}

TEST_CASE("drift field") {
  const auto g = make_grid(1.0, 1.0 / 64, 2.0, 1.0 / 64);
  const std::vector<double> pts = {-0.5, 0.3};
  const std::vector<double> z = {1.5, -0.7};
  const int n = 3;
  const double cn = 2.0;
  const auto d = drift_field(n, pts, z, 0.9, g, cn);
  double total = 0.0;
  for (double v : d.values.values()) total += v * g.dt * g.dx;
  const double r = std::ldexp(1.0, -n);
  CHECK(total == rel((z[0] + z[1]) * cn * r * 2.0 * r).epsilon(1e-12));
  // Support: only cells meeting [T - r, T] x windows.
  for (std::size_t k = 0; k < g.n_t; ++k)
    for (std::size_t i = 0; i < g.n_x; ++i)
      if (d.values(k, i) != 0.0) {
        CHECK(g.t(k) > 0.9 - r);
        CHECK(static_cast<double>(k) * g.dt < 0.9);
        CHECK(std::min(std::abs(g.x(i) + 0.5), std::abs(g.x(i) - 0.3)) < r + g.dx);
      }
  CHECK(d.values(g.row_at(0.85), g.node_at(-0.5)) == rel(z[0] * cn));
  CHECK_THROWS_AS(drift_field(3, {0.0, 0.2}, {1.0, 1.0}, 0.9, g, 1.0), ContractError);
  CHECK_THROWS_AS(drift_field(3, {0.0}, {1.0, 1.0}, 0.9, g, 1.0), ContractError);
  CHECK_THROWS_AS(drift_field(3, {0.0}, {1.0}, 1.5, g, 1.0), ContractError);
  CHECK_THROWS_AS(drift_field(0, {0.0}, {1.0}, 0.5, g, 1.0), ContractError);
}
