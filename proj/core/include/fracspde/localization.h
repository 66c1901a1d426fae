#pragma once

#include <vector>

#include "fracspde/stable_kernel.h"

namespace fracspde {

/// int_0^S [Phi(1, (a + eps) / s^{1/alpha}) - Phi(1, (a - eps) / s^{1/alpha})] ds
///   = int_0^S int_{a-eps}^{a+eps} G(s, y) dy ds,
/// with the stable CDF Phi. alpha = 2 uses the normal CDF directly so far
/// tails keep full relative accuracy. Adaptive Gauss-Kronrod in v with
/// s = S v^alpha, which smooths the s^{1/alpha} behaviour at 0.
double box_integral(const KernelTable& table, double S, double a, double eps);

/// c_n = 1 / int_0^{2^{-n}} int_{-2^{-n}}^{2^{-n}} G(s, y) dy ds; closed form for alpha = 2.
double c_norm(const KernelTable& table, int n);

struct PsiSpec {
  int n = 1;
  StableParams params;
  double T = 1.0;
  std::vector<double> points;
  double c_n = 1.0;

  double radius() const;
};

/// Checks n >= 1, sorted points with disjoint windows [x_i +- 2^{-n}], T >= 2^{-n}.
PsiSpec make_psi_spec(const KernelTable& table, int n, double T, std::vector<double> points);

/// Psi_n^i(t, x) = c_n int_0^{2^{-n} - (T - t)} int_{-2^{-n}}^{2^{-n}} G(s, x - x_i - y) dy ds
/// for t > T - 2^{-n}, else 0.
double psi(const KernelTable& table, const PsiSpec& spec, std::size_t i, double t, double x);

/// sum_i Psi_n^i(t, x).
double psi_sum(const KernelTable& table, const PsiSpec& spec, double t, double x);

/// int_0^t int_{-t}^{t} G(s, y) dy ds for 0 < t <= 1.
double low_g_integral(const KernelTable& table, double t);

}  // namespace fracspde
