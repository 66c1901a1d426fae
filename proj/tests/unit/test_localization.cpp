#include <doctest.h>

#include "approx.h"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fracspde/errors.h"
#include "fracspde/localization.h"
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

}  // namespace

TEST_CASE("c_n for the heat kernel: closed form against quadrature") {
  for (int n = 1; n <= 10; ++n) {
    const double r = std::ldexp(1.0, -n);
    CAPTURE(n);
    CHECK(c_norm(gauss_table(), n) == rel(1.0 / box_integral(gauss_table(), r, 0.0, r)).epsilon(1e-8));
  }
  CHECK(c_norm(gauss_table(), 2) == rel(8.871).epsilon(1e-4));
  // Leading term: denominator 2^{3n/2} -> 2 / sqrt(pi).
  double prev = INFINITY;
  for (int n : {4, 8, 12, 16, 20}) {
    const double err = std::abs(std::pow(2.0, 1.5 * n) / c_norm(gauss_table(), n) - 2.0 / std::sqrt(std::numbers::pi));
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-3);  // next term is O(2^{-n/2})
  CHECK_THROWS_AS(c_norm(gauss_table(), 0), DomainError);
}

TEST_CASE("c_n growth bound with one constant") {
  for (const auto* tb : {&gauss_table(), &stable_table()}) {
    const double alpha = tb->params().alpha;
    double lo = INFINITY, hi = 0.0;
    for (int n = 1; n <= 10; ++n) {
      const double ratio = c_norm(*tb, n) / std::pow(2.0, n * (2.0 - 1.0 / alpha));
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    MESSAGE("alpha " << alpha << ": c_n 2^{-n(2-1/alpha)} in [" << lo << ", " << hi << "]");
    CHECK(hi < 2.0 * lo);
  }
}

TEST_CASE("Psi: normalization, support and monotonicity") {
  for (const auto* tb : {&gauss_table(), &stable_table()}) {
    const double alpha = tb->params().alpha;
    for (int n = 1; n <= 6; ++n) {
      const auto spec = make_psi_spec(*tb, n, 1.0, {0.0});
      CAPTURE(alpha);
      CAPTURE(n);
      CHECK(std::abs(psi(*tb, spec, 0, 1.0, 0.0) - 1.0) < 1e-6);
      CHECK(psi(*tb, spec, 0, 1.0 - spec.radius(), 0.1) == 0.0);
      CHECK(psi_sum(*tb, spec, 1.0, 0.3) == psi(*tb, spec, 0, 1.0, 0.3));
    }
    const auto spec = make_psi_spec(*tb, 1, 1.0, {0.0});
    std::size_t violations = 0;
    double c_fit = 0.0;
    for (int ix = 0; ix < 20; ++ix) {
      const double x = -2.0 + 4.0 * ix / 19.0;
      double prev = 0.0;
      for (int it = 0; it <= 40; ++it) {
        const double t = 0.45 + 0.55 * it / 40.0;
        const double v = psi(*tb, spec, 0, t, x);
        if (v < prev - 1e-10) ++violations;
        CHECK(v >= 0.0);
        prev = v;
        const double gap = 1.0 - std::min((1.0 - t) * 2.0, 1.0);
        if (gap > 0.0) c_fit = std::max(c_fit, v / std::pow(gap, 1.0 - 1.0 / alpha));
      }
    }
    CHECK(violations == 0);
    MESSAGE("alpha " << alpha << ": fitted constant in Psi <= C (1 - (T-t) 2^n)^{1-1/alpha}: " << c_fit);
    CHECK(c_fit < 10.0);
  }
  CHECK_THROWS_AS(make_psi_spec(gauss_table(), 2, 1.0, {0.0, 0.4}), ContractError);
  CHECK_THROWS_AS(make_psi_spec(gauss_table(), 2, 1.0, {0.5, 0.0}), ContractError);
  CHECK_THROWS_AS(make_psi_spec(gauss_table(), 1, 0.25, {0.0}), ContractError);
}

TEST_CASE("Psi off-point decay") {
  for (const auto* tb : {&gauss_table(), &stable_table()}) {
    const double alpha = tb->params().alpha;
    const double bound = std::pow(2.0, -(1.0 + 1.0 / alpha)) * 1.15;
    for (int n = 4; n <= 8; ++n) {
      const auto a = make_psi_spec(*tb, n, 1.0, {0.0});
      const auto b = make_psi_spec(*tb, n + 1, 1.0, {0.0});
      for (double x : {-0.5, 0.5}) {
        const double pa = psi(*tb, a, 0, 1.0, x), pb = psi(*tb, b, 0, 1.0, x);
        CAPTURE(alpha);
        CAPTURE(n);
        CHECK(pa > 0.0);
        CHECK(pb / pa <= bound);
      }
    }
  }
}

TEST_CASE("convolution of Psi with the singular kernel") {
  // I_n = int_0^T int (T-s)^{-1/2} G(T-s, -y) Psi_n(s, y) dy ds for the heat kernel, x = x_1 = 0.
  // With u = T - s = r w^2 and y = -sqrt(u) z the singular factor cancels.
  const auto& tb = gauss_table();
  std::vector<double> scaled;
  for (int n = 1; n <= 4; ++n) {
    const auto spec = make_psi_spec(tb, n, 1.0, {0.0});
    const double r = spec.radius();
    auto inner = [&](double w) {
      const double u = r * w * w;
      return boost::math::quadrature::gauss<double, 20>::integrate(
          [&](double z) { return gaussian_kernel(1.0, z) * psi(tb, spec, 0, 1.0 - u, -std::sqrt(u) * z); }, -8.0,
          8.0);
    };
    // du u^{-1/2} = 2 sqrt(r) dw
    const double val = 2.0 * std::sqrt(r) * boost::math::quadrature::gauss<double, 15>::integrate(inner, 0.0, 1.0);
    scaled.push_back(val / std::pow(2.0, -0.5 * n));
  }
  const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
  MESSAGE("I_n 2^{n/2}: " << scaled[0] << " " << scaled[1] << " " << scaled[2] << " " << scaled[3]);
  CHECK(*hi < 2.0 * *lo);
}

TEST_CASE("low G integral") {
  CHECK(low_g_integral(gauss_table(), 1.0) == rel(0.720141106187292).epsilon(1e-12));
  for (const auto* tb : {&gauss_table(), &stable_table()}) {
    const double alpha = tb->params().alpha;
    double lo = INFINITY;
    for (int k = 1; k <= 8; ++k) {
      const double t = std::ldexp(1.0, -k);
      const double v = low_g_integral(*tb, t);
      CHECK(v < t);
      CHECK(v > 0.0);
      lo = std::min(lo, v / std::pow(t, 2.0 - 1.0 / alpha));
    }
    MESSAGE("alpha " << alpha << ": min low_g_integral / t^{2-1/alpha} = " << lo);
    CHECK(lo > 0.1);
  }
  CHECK(low_g_integral(stable_table(), 0.5) == rel(box_integral(stable_table(), 0.5, 0.0, 0.5)));
  CHECK_THROWS_AS(low_g_integral(gauss_table(), 1.5), DomainError);
}
