#include "fracspde/localization.h"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fracspde/errors.h"
#include "fracspde/special_fn.h"

namespace fracspde {

namespace {

// P(a <= X_1 <= b) for the unit-time law.
double unit_mass(const KernelTable& table, double a, double b) {
  if (table.params().alpha == 2.0) {
    // G(1, .) is the N(0, 2) density.
    constexpr double r = 0.70710678118654752440;
    if (a >= 0.0) return normal_ccdf(a * r) - normal_ccdf(b * r);
    if (b <= 0.0) return normal_cdf(b * r) - normal_cdf(a * r);
    return 1.0 - normal_cdf(a * r) - normal_ccdf(b * r);
  }
  return table.mass_between(a, b);
}

}  // namespace

double box_integral(const KernelTable& table, double S, double a, double eps) {
  if (!(S >= 0.0) || !(eps > 0.0)) throw DomainError("box_integral: need S >= 0 and eps > 0");
  if (S == 0.0) return 0.0;
  const double alpha = table.params().alpha;
  auto f = [&](double v) {
    if (v <= 0.0) return 0.0;
    const double s = S * std::pow(v, alpha);
    const double sc = std::pow(s, -1.0 / alpha);
    return unit_mass(table, (a - eps) * sc, (a + eps) * sc) * S * alpha * std::pow(v, alpha - 1.0);
  };
  const double val = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 10, 1e-10);
  return val;
}

double c_norm(const KernelTable& table, int n) {
  if (n < 1) throw DomainError("c_norm: n must be >= 1");
  const double r = std::ldexp(1.0, -n);
  if (table.params().alpha == 2.0) return 1.0 / heat_double_integral(2.0, r);
  return 1.0 / box_integral(table, r, 0.0, r);
}

double PsiSpec::radius() const { return std::ldexp(1.0, -n); }

PsiSpec make_psi_spec(const KernelTable& table, int n, double T, std::vector<double> points) {
  if (n < 1) throw DomainError("make_psi_spec: n must be >= 1");
  if (points.empty()) throw ContractError("make_psi_spec: no points");
  if (!std::is_sorted(points.begin(), points.end())) throw ContractError("make_psi_spec: points must be sorted");
  const double r = std::ldexp(1.0, -n);
  if (!(T >= r)) throw ContractError("make_psi_spec: T must be at least 2^{-n}");
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    if (points[i + 1] - points[i] <= 2.0 * r) throw ContractError("make_psi_spec: windows overlap");
  return {n, table.params(), T, std::move(points), c_norm(table, n)};
}

double psi(const KernelTable& table, const PsiSpec& spec, std::size_t i, double t, double x) {
  if (i >= spec.points.size()) throw ContractError("psi: point index out of range");
  if (!(t > 0.0) || t > spec.T) throw DomainError("psi: need 0 < t <= T");
  const double r = spec.radius();
  const double S = r - (spec.T - t);
  if (S <= 0.0) return 0.0;
  return spec.c_n * box_integral(table, S, x - spec.points[i], r);
}

double psi_sum(const KernelTable& table, const PsiSpec& spec, double t, double x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < spec.points.size(); ++i) acc += psi(table, spec, i, t, x);
  return acc;
}

double low_g_integral(const KernelTable& table, double t) {
  if (!(t > 0.0) || t > 1.0) throw DomainError("low_g_integral: need 0 < t <= 1");
  if (table.params().alpha == 2.0) return heat_double_integral(2.0, t);
  return box_integral(table, t, 0.0, t);
}

}  // namespace fracspde
