#include "fracspde/special_fn.h"

#include <boost/math/quadrature/exp_sinh.hpp>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fracspde/errors.h"

namespace fracspde {

namespace {

constexpr double kPi = std::numbers::pi;
// z^{1/a} beyond which the exponential asymptotic replaces the series.
constexpr double kAsymptoticSwitch = 30.0;
// For negative z the series loses roughly z^{1/a}/ln(10) digits; past this
// point the integral representation is used instead.
constexpr double kNegativeSwitch = 4.0;
constexpr double kLogOverflow = 709.0;

bool is_nonpositive_integer(double x) { return x <= 0.0 && std::floor(x) == x; }

// Gorenflo-Loutchko-Luchko representation, valid for 0 < a < 1, b < 1 + a, z < 0.
double ml_integral_base(double a, double b, double z) {
  const double s1 = std::sin(kPi * (1.0 - b));
  const double s2 = std::sin(kPi * (1.0 - b + a));
  const double c = std::cos(a * kPi);
  const double pw = (1.0 - b) / a;
  auto integrand = [&](double chi) {
    const double den = chi * chi - 2.0 * chi * z * c + z * z;
    return std::pow(chi, pw) * std::exp(-std::pow(chi, 1.0 / a)) * (chi * s1 - z * s2) / den;
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  double err = 0.0;
  const double v = integrator.integrate(integrand, 0.0, std::numeric_limits<double>::infinity(),
                                        1e-14, &err);
  return v / (a * kPi);
}

// Shift b down with E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z until b < 1 + a.
double ml_integral(double a, double b, double z) {
  if (b < 1.0 + a) return ml_integral_base(a, b, z);
  return (ml_integral(a, b - a, z) - reciprocal_gamma(b - a)) / z;
}

}  // namespace

void validate(const MittagParams& p) {
  if (!(p.a > 0.0) || !(p.b > 0.0))
    throw DomainError("mittag_leffler: indices a and b must be positive");
  if (!(p.series_tol > 0.0)) throw DomainError("mittag_leffler: series_tol must be positive");
  if (p.max_terms < 1) throw DomainError("mittag_leffler: max_terms must be positive");
}

double reciprocal_gamma(double x) {
  if (is_nonpositive_integer(x)) return 0.0;
  return 1.0 / std::tgamma(x);
}

double mittag_leffler_series(const MittagParams& p, double z) {
  validate(p);
  if (z == 0.0) return reciprocal_gamma(p.b);
  const long double log_abs_z = std::log(std::fabs(static_cast<long double>(z)));
  const bool alternating = z < 0.0;
  long double sum = 0.0L;
  long double max_term = 0.0L;
  long double prev = std::numeric_limits<long double>::infinity();
  // The neglected tail is a few times the last term, so stop well below tol.
  const long double stop = std::max(static_cast<long double>(p.series_tol) * 1e-3L, LDBL_EPSILON);
  for (int k = 0; k < p.max_terms; ++k) {
    const long double arg = static_cast<long double>(p.a) * k + p.b;
    const long double mag = std::exp(k * log_abs_z - std::lgamma(arg));
    const long double term = (alternating && (k & 1)) ? -mag : mag;
    sum += term;
    if (mag > max_term) max_term = mag;
    if (!std::isfinite(static_cast<double>(sum)))
      throw DomainError("mittag_leffler: series overflows a double");
    const long double abs_sum = std::fabs(sum);
    if (mag < prev && mag <= stop * abs_sum) {
      const long double rounding = max_term * LDBL_EPSILON * 8.0L;
      if (rounding > p.series_tol * abs_sum)
        throw AccuracyError("mittag_leffler: series cancellation exceeds tolerance",
                            static_cast<double>(rounding / abs_sum));
      return static_cast<double>(sum);
    }
    prev = mag;
  }
  throw AccuracyError("mittag_leffler: series did not converge within max_terms",
                      static_cast<double>(prev / std::fabs(sum)));
}

double mittag_leffler_asymptotic(const MittagParams& p, double z, int n_corrections) {
  validate(p);
  if (!(z > 0.0)) throw DomainError("mittag_leffler_asymptotic: z must be positive");
  if (!(p.a < 2.0)) throw DomainError("mittag_leffler_asymptotic: requires a < 2");
  const double root = std::pow(z, 1.0 / p.a);
  const double log_lead = root + (1.0 - p.b) / p.a * std::log(z) - std::log(p.a);
  if (log_lead > kLogOverflow) throw DomainError("mittag_leffler: result overflows a double");
  double v = std::exp(log_lead);
  double zk = 1.0;
  for (int k = 1; k <= n_corrections; ++k) {
    zk /= z;
    v -= zk * reciprocal_gamma(p.b - p.a * k);
  }
  return v;
}

double mittag_leffler(const MittagParams& p, double z) {
  validate(p);
  if (z == 0.0) return reciprocal_gamma(p.b);
  if (p.a == 1.0 && p.b == 1.0) {
    if (z > kLogOverflow) throw DomainError("mittag_leffler: result overflows a double");
    return std::exp(z);
  }
  if (p.a == 1.0 && p.b == 2.0) {
    if (z > kLogOverflow) throw DomainError("mittag_leffler: result overflows a double");
    return std::expm1(z) / z;
  }
  const double root = std::pow(std::fabs(z), 1.0 / p.a);
  if (z > 0.0) {
    if (p.a <= 1.0 && root > kAsymptoticSwitch) return mittag_leffler_asymptotic(p, z);
    return mittag_leffler_series(p, z);
  }
  if (p.a < 1.0 && root > kNegativeSwitch) return ml_integral(p.a, p.b, z);
  try {
    return mittag_leffler_series(p, z);
  } catch (const AccuracyError&) {
    if (p.a < 1.0) return ml_integral(p.a, p.b, z);
    throw;
  }
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_ccdf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

void validate(const ResolventSpec& s) {
  if (!(s.alpha > 1.0 && s.alpha <= 2.0)) throw DomainError("alpha must lie in (1,2]");
  if (!(s.lambda > 0.0)) throw DomainError("lambda must be positive");
}

namespace {
struct ResolventConsts {
  double b;
  double c;
};

ResolventConsts consts(const ResolventSpec& s) {
  validate(s);
  const double b = 1.0 - 1.0 / s.alpha;
  return {b, s.lambda * std::tgamma(b)};
}

// F0(tau) = int_0^tau K, F1(tau) = int_0^tau F0.
double f0(const ResolventConsts& k, double tau) {
  if (tau <= 0.0) return 0.0;
  const double w = k.c * std::pow(tau, k.b);
  return w * mittag_leffler({k.b, k.b + 1.0}, w);
}

double f1(const ResolventConsts& k, double tau) {
  if (tau <= 0.0) return 0.0;
  const double w = k.c * std::pow(tau, k.b);
  return w * tau * mittag_leffler({k.b, k.b + 2.0}, w);
}
}  // namespace

double resolvent_kernel(const ResolventSpec& s, double t) {
  if (!(t > 0.0)) throw DomainError("resolvent_kernel: t must be positive");
  const auto k = consts(s);
  const double w = k.c * std::pow(t, k.b);
  return std::pow(t, -1.0 / s.alpha) * k.c * mittag_leffler({k.b, k.b}, w);
}

double resolvent_integral(const ResolventSpec& s, double t) {
  if (t < 0.0) throw DomainError("resolvent_integral: t must be nonnegative");
  return f0(consts(s), t);
}

double gronwall_constant_solution(const ResolventSpec& s, double beta, double t) {
  if (t < 0.0) throw DomainError("gronwall_constant_solution: t must be nonnegative");
  const auto k = consts(s);
  if (t == 0.0) return beta;
  return beta * mittag_leffler({k.b, 1.0}, k.c * std::pow(t, k.b));
}

std::vector<double> gronwall_solve(const ResolventSpec& s, double dt, std::span<const double> beta) {
  if (!(dt > 0.0)) throw DomainError("gronwall_solve: dt must be positive");
  const auto k = consts(s);
  const std::size_t n = beta.size();
  for (double v : beta)
    if (!std::isfinite(v)) throw DomainError("gronwall_solve: beta must be finite");
  std::vector<double> F0(n), F1(n);
  for (std::size_t m = 0; m < n; ++m) {
    F0[m] = f0(k, m * dt);
    F1[m] = f1(k, m * dt);
  }
  // For the lag-m cell: a_w multiplies the left node, c_w the right node.
  std::vector<double> a_w(n, 0.0), c_w(n, 0.0);
  for (std::size_t m = 1; m < n; ++m) {
    const double A = F0[m] - F0[m - 1];
    double C = (F1[m] - F1[m - 1]) / dt - F0[m - 1];
    C = std::clamp(C, 0.0, A);
    a_w[m] = A - C;
    c_w[m] = C;
  }
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = beta[i];
    for (std::size_t j = 0; j < i; ++j) {
      const std::size_t m = i - j;
      acc += a_w[m] * beta[j] + c_w[m] * beta[j + 1];
    }
    f[i] = acc;
  }
  return f;
}

std::vector<double> contraction_solve(const ResolventSpec& s, double T, double epsilon, double dt,
                                      std::span<const double> beta) {
  validate(s);
  if (!(epsilon > 0.0 && epsilon < T))
    throw DomainError("contraction_solve: need 0 < epsilon < T");
  if (!(dt > 0.0)) throw DomainError("contraction_solve: dt must be positive");
  const double start = (T - epsilon) / dt;
  const double start_round = std::round(start);
  if (std::fabs(start - start_round) > 1e-9 * std::max(1.0, start))
    throw ContractError("contraction_solve: T - epsilon must be a grid node");
  const double end = std::round(T / dt);
  if (beta.size() < static_cast<std::size_t>(end) + 1)
    throw ContractError("contraction_solve: beta must be sampled up to T");
  const auto k0 = static_cast<std::size_t>(start_round);
  const auto k1 = static_cast<std::size_t>(end);
  std::vector<double> f(beta.begin(), beta.end());
  ResolventSpec local = s;
  local.lambda = s.lambda * std::pow(epsilon, -(1.0 - 1.0 / s.alpha));
  const auto window = gronwall_solve(local, dt, beta.subspan(k0, k1 - k0 + 1));
  for (std::size_t i = 0; i < window.size(); ++i) f[k0 + i] = window[i];
  return f;
}

double heat_double_integral(double nu, double t) {
  if (!(nu > 0.0) || !(t > 0.0)) throw DomainError("heat_double_integral: nu and t must be positive");
  // t [2(r^2+1)Phi(r) - 2r^2 + sqrt(2/pi) r e^{-r^2/2} - 1], r = sqrt(t/nu),
  // regrouped as erf(r/sqrt2) - 2 r^2 Q(r) + sqrt(2/pi) r e^{-r^2/2} to avoid cancellation.
  const double r = std::sqrt(t / nu);
  const double e = std::erf(r / std::numbers::sqrt2) - 2.0 * r * r * normal_ccdf(r) +
                   std::sqrt(2.0 / kPi) * r * std::exp(-0.5 * r * r);
  return t * e;
}

}  // namespace fracspde
