#pragma once

#include <span>
#include <vector>

namespace fracspde {

/// Indices and stopping rule for E_{a,b}(z) = sum_k z^k / Gamma(a k + b).
struct MittagParams {
  double a = 1.0;
  double b = 1.0;
  double series_tol = 1e-15;
  int max_terms = 20000;
};

void validate(const MittagParams& p);

/// Two-parameter Mittag-Leffler function on the real line. Picks the power
/// series, the large-z exponential asymptotic (a <= 1, z^{1/a} > 30) or, for
/// negative z where the series cancels badly, an integral representation.
/// Throws AccuracyError when no route reaches series_tol and DomainError when
/// the result would overflow a double.
double mittag_leffler(const MittagParams& p, double z);

/// Plain power series (long double accumulation). Throws AccuracyError when
/// max_terms is hit or cancellation eats the requested tolerance.
double mittag_leffler_series(const MittagParams& p, double z);

/// (1/a) z^{(1-b)/a} exp(z^{1/a}) - sum_{k=1}^{n_corrections} z^{-k} / Gamma(b - a k)
/// for z > 0 and 0 < a < 2.
double mittag_leffler_asymptotic(const MittagParams& p, double z, int n_corrections = 8);

/// 1/Gamma(x), zero at the poles of Gamma.
double reciprocal_gamma(double x);

/// Standard normal CDF.
double normal_cdf(double x);
/// Standard normal upper tail 1 - normal_cdf(x), accurate for large x.
double normal_ccdf(double x);

struct ResolventSpec {
  double alpha = 2.0;
  double lambda = 1.0;
};

void validate(const ResolventSpec& s);

/// K_lambda(t) = t^{-1/alpha} lambda Gamma(b) E_{b,b}(t^b lambda Gamma(b)), b = 1 - 1/alpha.
double resolvent_kernel(const ResolventSpec& s, double t);

/// int_0^t K_lambda(s) ds = c t^b E_{b,1+b}(c t^b) with c = lambda Gamma(b).
double resolvent_integral(const ResolventSpec& s, double t);

/// Solution of f = beta + int_0^t K_lambda(t-s) beta(s) ds for constant beta:
/// beta * E_{b,1}(lambda Gamma(b) t^b).
double gronwall_constant_solution(const ResolventSpec& s, double beta, double t);

/// f(t_k) = beta(t_k) + int_0^{t_k} K_lambda(t_k - s) beta(s) ds on t_k = k dt,
/// k = 0..n-1, with beta interpolated linearly between nodes and the kernel
/// integrated exactly against each linear piece (so the t^{-1/alpha}
/// singularity costs nothing). All weights are nonnegative.
std::vector<double> gronwall_solve(const ResolventSpec& s, double dt, std::span<const double> beta);

/// Localized resolvent on the window (T - epsilon, T]: f = beta for t <= T - epsilon,
/// and inside the window the Gronwall solution started at T - epsilon with
/// lambda replaced by lambda * epsilon^{-(1 - 1/alpha)}. beta is sampled on
/// t_k = k dt and T - epsilon must be a grid node (ContractError otherwise).
std::vector<double> contraction_solve(const ResolventSpec& s, double T, double epsilon, double dt,
                                      std::span<const double> beta);

/// int_0^t int_{-t}^{t} (2 pi nu s)^{-1/2} exp(-y^2 / (2 nu s)) dy ds in closed form.
double heat_double_integral(double nu, double t);

}  // namespace fracspde
