#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fracspde/stable_kernel.h"

namespace fracspde {

/// Uniform space-time lattice. Time row k covers the cell (k dt, (k+1) dt] and
/// is labelled by its right end t(k) = (k+1) dt, k = 0..n_t-1. Space node i
/// sits at x(i) = (i - half) dx on [-half dx, half dx].
struct SpaceTimeGrid {
  double T = 1.0;
  double dt = 1.0 / 256;
  double L = 8.0;
  double dx = 1.0 / 64;
  std::size_t n_t = 0;
  std::size_t n_x = 0;
  std::size_t half = 0;

  double t(std::size_t k) const noexcept { return static_cast<double>(k + 1) * dt; }
  double x(std::size_t i) const noexcept {
    return (static_cast<double>(i) - static_cast<double>(half)) * dx;
  }
  /// Row whose right end is closest to t.
  std::size_t row_at(double t) const;
  /// Node closest to x.
  std::size_t node_at(double x) const;
};

/// n_t = round(T/dt) rows and 2 round(L/dx) + 1 nodes.
SpaceTimeGrid make_grid(double T, double dt, double L, double dx);
bool same_grid(const SpaceTimeGrid& a, const SpaceTimeGrid& b);

/// Row-major (time, space) array on a SpaceTimeGrid.
class SpaceTimeField {
 public:
  SpaceTimeField() = default;
  explicit SpaceTimeField(const SpaceTimeGrid& g, double fill = 0.0)
      : grid_(g), values_(g.n_t * g.n_x, fill) {}

  const SpaceTimeGrid& grid() const noexcept { return grid_; }
  double& operator()(std::size_t k, std::size_t i) noexcept { return values_[k * grid_.n_x + i]; }
  double operator()(std::size_t k, std::size_t i) const noexcept { return values_[k * grid_.n_x + i]; }
  std::span<double> row(std::size_t k) noexcept { return {values_.data() + k * grid_.n_x, grid_.n_x}; }
  std::span<const double> row(std::size_t k) const noexcept {
    return {values_.data() + k * grid_.n_x, grid_.n_x};
  }
  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double max_abs() const noexcept;

 private:
  SpaceTimeGrid grid_;
  std::vector<double> values_;
};

/// (f * g)(row a, node i) = sum_{j=0}^{a} sum_m f(j, m) g(a - j, i - m) dt dx,
/// with f's row j the time cell j and g's row a - j the time lag. Spatial sums
/// are linear convolutions via zero-padded FFTs; g is zero beyond [-L, L].
/// Output rows are split across `threads` workers with a fixed reduction order.
SpaceTimeField spacetime_convolve(const SpaceTimeField& f, const SpaceTimeField& g, int threads = 1);

/// Space-time cell averages of G(s,y)^2: exact in space through the table's
/// square integrals, Gauss-Legendre in time with the substitution
/// s = dt v^{alpha/(alpha-1)} on the first cell that removes the s^{-1/alpha}
/// singularity.
SpaceTimeField g_squared_field(const KernelTable& table, const SpaceTimeGrid& grid);

/// One cell of g_squared_field: time cell (k dt, (k+1) dt], space cell of
/// width dx centered at xc.
double g_squared_cell_average(const KernelTable& table, double dt, double dx, std::size_t k, double xc);

/// Cell averages in time of a field: row a -> (row a + row a-1)/2, row -1 = 0.
/// Turns the right-end values produced by spacetime_convolve into averages
/// over (a dt, (a+1) dt].
SpaceTimeField right_end_to_cell_average(const SpaceTimeField& f);

/// Linear interpolation in time between cell centers (k + 1/2) dt of a field
/// holding time-cell averages; constant before the first center, linear
/// extrapolation past the last one.
double sample_in_time(const SpaceTimeField& cell_averages, double t, std::size_t i);

struct KLambdaSeries {
  SpaceTimeField kernel;            // time-cell averages of the partial sum
  std::vector<double> term_norms;   // sup norm of each series term
  double truncation_ratio = 0.0;    // |T_N| / |T_{N-1}|
  double truncation_estimate = 0.0; // geometric tail bound |T_N| r / (1 - r), inf when r >= 1
};

/// sum_{n=0}^{n_terms-1} lambda^{2(n+1)} (G^2)^{*(n+1)} on the grid.
KLambdaSeries k_lambda_series(const KernelTable& table, double lambda, const SpaceTimeGrid& grid,
                              int n_terms = 12, int threads = 1);

/// Closed-form moment kernel for alpha = 2:
/// (2 pi t)^{-1/2} (lambda^2 (8 pi t)^{-1/2} + (lambda^4/4) e^{lambda^4 t/8} Phi(lambda^2 sqrt(t)/2)) e^{-x^2/(2t)}.
double k_lambda_heat_closed(double lambda, double t, double x);

/// 2 J0^2 + ([varsigma^2 + 2 J0^2] * K_lambda): second-moment envelope on the
/// grid of j0_squared (time-cell averages of J0^2). The caller passes
/// lambda = 2 sqrt(p) Lip_rho.
SpaceTimeField second_moment_bound(const SpaceTimeField& j0_squared, const KernelTable& table,
                                   double lambda, double varsigma, int n_terms = 12, int threads = 1);

}  // namespace fracspde
