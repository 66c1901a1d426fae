#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fracspde/spde_solver.h"

namespace fracspde {

/// FNV-1a 64-bit hash of a canonical config text, as 16 hex digits.
std::string config_digest(std::string_view canonical_text);

enum class ObservableKind { point_values, infimum, increments, det_sigma };

struct ObservableSpec {
  ObservableKind kind = ObservableKind::point_values;
  double t = 1.0;
  std::vector<double> points;   // point_values, det_sigma: x_1..x_d; increments: {x}
  double k_lo = -0.5;           // infimum over nodes in [k_lo, k_hi]
  double k_hi = 0.5;
  std::vector<double> lags;     // increments: u(t + h, x) - u(t, x) for each h
  MalliavinWindow window;       // det_sigma
};

/// Number of values one path contributes.
std::size_t observable_dim(const ObservableSpec& spec);

/// Extracts the observable from one solved path into `out` (observable_dim values).
void extract_observable(const MildScheme& scheme, const SolutionField& sol, const NoisePath& noise,
                        const DiffusionCoefficient& rho, const SchemeOptions& opts, const ObservableSpec& spec,
                        std::span<double> out);

struct Ensemble {
  ObservableKind kind = ObservableKind::point_values;
  std::size_t dim = 1;
  std::vector<double> samples;        // paths x dim, row-major; NaN for failed paths
  std::vector<std::uint8_t> failed;   // 1 where the solver diverged
  std::uint64_t master_seed = 0;
  std::string digest;

  std::size_t size() const noexcept { return failed.size(); }
  std::size_t failures() const noexcept;
  std::span<const double> sample(std::size_t p) const noexcept { return {samples.data() + p * dim, dim}; }
  /// Component c of every successful path.
  std::vector<double> column(std::size_t c = 0) const;
};

/// Runs paths 0..M-1 with noise keyed by (master_seed, path). Work is split
/// by path index over `threads` workers; each path writes only its own slot,
/// so the result does not depend on the thread count. `per_path` receives
/// the solved field, its noise and an output row of `dim` values; a
/// DivergenceError marks the path failed.
using PathObserver = std::function<void(std::size_t path, const SolutionField&, const NoisePath&, std::span<double>)>;
Ensemble run_paths(const MildScheme& scheme, const DiffusionCoefficient& rho, const SchemeOptions& opts,
                   std::size_t paths, std::uint64_t master_seed, std::size_t dim, const PathObserver& per_path,
                   int threads = 1);

Ensemble run_ensemble(const MildScheme& scheme, const DiffusionCoefficient& rho, const ObservableSpec& spec,
                      std::size_t paths, std::uint64_t master_seed, const SchemeOptions& opts = {},
                      int threads = 1, std::string digest = {});

struct DensityEstimate {
  std::size_t dim = 1;
  std::vector<std::vector<double>> axes;  // evaluation grid per axis
  std::vector<double> values;             // row-major over the product grid, first axis slowest
  std::vector<double> bandwidth;
  std::string kernel = "gaussian";

  /// Integral of the estimate over its grid (trapezoid rule).
  double mass() const;
};

/// Gaussian product-kernel KDE. Bandwidth: Silverman's rule
/// 0.9 min(sd, IQR/1.34) n^{-1/5} in one dimension, Scott's sd n^{-1/(d+4)} for d = 2, 3.
/// The grid spans [min - 5h, max + 5h] per axis.
DensityEstimate kde(const std::vector<double>& samples, std::size_t dim, std::size_t grid_points = 0);

/// Value of the same estimator at one point.
double kde_value(const std::vector<double>& samples, std::size_t dim, const std::vector<double>& bandwidth,
                 std::span<const double> at);

struct Proportion {
  double threshold = 0.0;
  std::size_t hits = 0;
  std::size_t n = 0;
  double p = 0.0;
  double lo = 0.0;   // Wilson 95% interval
  double hi = 0.0;
};

Proportion wilson(std::size_t hits, std::size_t n, double z = 1.959963984540054);

/// P(X < eps) for each eps; NaN samples are skipped.
std::vector<Proportion> small_ball(const std::vector<double>& samples, const std::vector<double>& eps_list);

/// Shape of log P against |log eps| (eps sorted decreasing, so |log eps| increasing).
/// Decreasing: log P non-increasing. Concave: successive slopes non-increasing.
/// Zero probabilities give log P = -inf; they must form a tail and are
/// consistent with both properties; `finite_points` counts the rest.
struct ShapeDiagnostic {
  bool decreasing = false;
  bool concave = false;
  std::size_t finite_points = 0;
  std::vector<double> slopes;
};

ShapeDiagnostic log_log_shape(const std::vector<Proportion>& curve);

/// P(det sigma < eps) for each eps.
std::vector<Proportion> det_sigma_smallball(const std::vector<double>& dets, const std::vector<double>& eps_list);

struct NegativeMoment {
  double p = 1.0;
  double value = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();    // jackknife
  double top_share = 0.0;       // share of sum X^{-p} carried by the largest 1%
  bool unstable = false;        // top_share > 0.5
  double nonpositive_fraction = 0.0;
  std::size_t used = 0;
};

/// Empirical E[X^{-p}] over the strictly positive samples; nonpositive
/// samples are masked and reported.
std::vector<NegativeMoment> negative_moment(const std::vector<double>& samples, const std::vector<double>& p_list);

/// Smallest s in s_grid with max over y_grid of |rho(s, y, J0(s, y))| > zero_tol, +inf when none.
double estimate_t0(const DiffusionCoefficient& rho, const InitialMeasure& mu, const KernelTable& table,
                   const std::vector<double>& s_grid, const std::vector<double>& y_grid, double zero_tol = 1e-12);

struct HolderFit {
  double slope = 0.0;
  double se = 0.0;               // delete-one jackknife over paths
  double ci_lo = 0.0;            // slope -+ 1.96 se
  double ci_hi = 0.0;
  std::vector<double> lags;
  std::vector<double> norms;     // sqrt(E |u(t+h,x) - u(t,x)|^2)
  std::size_t paths = 0;
};

/// Log-log least-squares slope of the L2 increment norm against the lag.
/// `increments` is paths x lags, row-major; NaN rows are skipped.
HolderFit holder_fit(const std::vector<double>& increments, const std::vector<double>& lags);

/// Runs the increments observable at (t, x) and fits the exponent.
HolderFit holder_exponent(const MildScheme& scheme, const DiffusionCoefficient& rho, double t, double x,
                          const std::vector<double>& lags, std::size_t paths, std::uint64_t master_seed,
                          const SchemeOptions& opts = {}, int threads = 1);

}  // namespace fracspde
