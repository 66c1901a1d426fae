#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "fracspde/fft.h"
#include "fracspde/moment_kernel.h"
#include "fracspde/noise_initial.h"
#include "fracspde/stable_kernel.h"

namespace fracspde {

/// rho(t, x, z) with its Lipschitz constant Lip and growth constant varsigma
/// (|rho| <= Lip (varsigma + |z|)). The built-in kinds avoid a std::function
/// call per cell.
class DiffusionCoefficient {
 public:
  enum class Kind { pam, constant, sine, abs_sine, custom };
  using Fn = std::function<double(double, double, double)>;

  /// rho(z) = lambda z.
  static DiffusionCoefficient pam(double lambda);
  /// rho = c.
  static DiffusionCoefficient constant(double c);
  /// rho(z) = a sin z.
  static DiffusionCoefficient sine(double a);
  /// rho(z) = a |sin z|: nonnegative, rho(0) = 0, not differentiable at k pi.
  static DiffusionCoefficient abs_sine(double a);
  static DiffusionCoefficient custom(Fn f, std::optional<Fn> derivative, double lip, double varsigma);

  Kind kind() const noexcept { return kind_; }
  double scale() const noexcept { return scale_; }
  double lip() const noexcept { return lip_; }
  double varsigma() const noexcept { return varsigma_; }
  bool is_pam() const noexcept { return kind_ == Kind::pam; }
  bool has_derivative() const noexcept;

  double operator()(double t, double x, double z) const {
    switch (kind_) {
      case Kind::pam: return scale_ * z;
      case Kind::constant: return scale_;
      case Kind::sine: return scale_ * std::sin(z);
      case Kind::abs_sine: return scale_ * std::abs(std::sin(z));
      case Kind::custom: break;
    }
    return fn_(t, x, z);
  }
  /// d rho / dz; ContractError when not available.
  double derivative(double t, double x, double z) const;

  /// Spot check of the growth and Lipschitz bounds on `samples` random triples
  /// (t, x, z) from a fixed-seed generator. Returns the worst violation ratio
  /// (<= 1 means both bounds held).
  double spot_check(std::size_t samples = 1000) const;

 private:
  Kind kind_ = Kind::constant;
  double scale_ = 0.0;
  double lip_ = 0.0;
  double varsigma_ = 0.0;
  Fn fn_;
  std::optional<Fn> deriv_;
};

struct SchemeOptions {
  /// Floor u at 0 after each step (PAM with nonnegative data only); the
  /// removed mass is reported, never hidden.
  bool positivity_clip = false;
  /// Girsanov drift <z, h_n>; enters as an extra increment drift dt dx.
  const DriftField* drift = nullptr;
};

/// u(t(k), x(i)) on the grid. Row k is time t(k) = (k+1) dt; row 0 equals J0(dt).
struct SolutionField {
  SpaceTimeField u;
  NoiseKey key;
  bool positivity_clip = false;
  double clipped_mass = 0.0;   // sum over steps of removed negative mass (dx-weighted)
  std::size_t clipped_cells = 0;

  const SpaceTimeGrid& grid() const noexcept { return u.grid(); }
};

/// One-step mild scheme on a fixed grid and initial measure. Holds J0 at every
/// node time and the spectra of the two step kernels; all methods are const and
/// safe to call from several threads.
///
/// Step k -> k+1 (noise cell k+1 = (t(k), t(k+1)]):
///   u_{k+1} = J0(t(k+1)) + I_{k+1},
///   I_{k+1} = P (*) I_k + N (*) [rho(t(k), x, u_k) (dW_{k+1} + drift_{k+1} dt dx)],
/// with P_j = int over cell j of G(dt, .) and N_j = c G(tau, x_j),
/// tau = (1 - 1/alpha)^alpha dt, c chosen so that sum_j N_j^2 dt dx equals the
/// exact one-cell variance int_0^dt int G(s, y)^2 dy ds. Splitting off J0 keeps
/// measure-valued data off the grid and makes rho = 0 reproduce J0 exactly.
class MildScheme {
 public:
  MildScheme(const KernelTable& table, const SpaceTimeGrid& grid, const InitialMeasure& mu);

  const SpaceTimeGrid& grid() const noexcept { return grid_; }
  const KernelTable& table() const noexcept { return *table_; }
  const SpaceTimeField& j0() const noexcept { return j0_; }
  const std::vector<double>& step_kernel() const noexcept { return p_taps_; }
  const std::vector<double>& noise_kernel() const noexcept { return n_taps_; }
  double noise_time() const noexcept { return tau_; }

  SolutionField simulate(const DiffusionCoefficient& rho, const NoisePath& noise,
                         const SchemeOptions& opts = {}) const;

  /// Forward derivative of the scheme with respect to the noise cell
  /// (cell, node): zero before row `cell`, N(x - x_node) rho(u(cell-1, node))
  /// at row `cell`, then the linearized step.
  SpaceTimeField malliavin(const SolutionField& base, const NoisePath& noise, const DiffusionCoefficient& rho,
                           std::size_t cell, std::size_t node, const SchemeOptions& opts = {}) const;

  /// Reverse sweep: d u(row, node) / d dW(c, j) for every noise cell c <= row.
  /// Row c of the result holds the sensitivities to noise cell c; rows past
  /// `row` are zero.
  SpaceTimeField sensitivity(const SolutionField& base, const NoisePath& noise, const DiffusionCoefficient& rho,
                             std::size_t row, std::size_t node, const SchemeOptions& opts = {}) const;

 private:
  void step(std::span<const double> stochastic, std::span<const double> forcing, std::span<double> out,
            SpectralConvolver::Workspace& ws, std::vector<Complex>& acc) const;
  void step_transposed(std::span<const double> adjoint, std::span<double> through_p, std::span<double> through_n,
                       SpectralConvolver::Workspace& ws) const;

  const KernelTable* table_;
  SpaceTimeGrid grid_;
  SpaceTimeField j0_;
  double tau_ = 0.0;
  std::vector<double> p_taps_;
  std::vector<double> n_taps_;
  SpectralConvolver conv_;
  SpectralConvolver::Spectrum p_hat_, n_hat_, p_hat_t_, n_hat_t_;
};

/// Builds a MildScheme and runs one path.
SolutionField simulate_path(const KernelTable& table, const SpaceTimeGrid& grid, const DiffusionCoefficient& rho,
                            const InitialMeasure& mu, const NoisePath& noise, const SchemeOptions& opts = {});

/// Two runs on the same increments; mu1 - mu2 and mu2 must be nonnegative.
std::pair<SolutionField, SolutionField> simulate_coupled_pair(const KernelTable& table, const SpaceTimeGrid& grid,
                                                              const DiffusionCoefficient& rho,
                                                              const InitialMeasure& mu1, const InitialMeasure& mu2,
                                                              const NoisePath& noise, const SchemeOptions& opts = {});

struct PicardResult {
  SpaceTimeField u;
  std::vector<double> gaps;  // sup |u_m - u_{m-1}| for m = 1..iterations
};

/// Picard iterates u_0 = J0, u_{m+1} = J0 + sum_{c<=a} sum_j G((a-c+1) dt, x_i - x_j)
/// rho(u_m(c-1, j)) dW(c, j): the left-point stochastic convolution with the
/// exact kernel at every lag, an independent discretization of the mild form.
/// Cost O(m n_t^2 n_x log n_x); intended for tiny grids.
PicardResult picard_solve(const KernelTable& table, const SpaceTimeGrid& grid, const DiffusionCoefficient& rho,
                          const InitialMeasure& mu, const NoisePath& noise, int iterations, int threads = 1);

struct MalliavinWindow {
  double t = 1.0;        // evaluation time
  double r_lo = 0.5;     // noise times r in [r_lo, r_hi]
  double r_hi = 1.0;
  double z_lo = -1.0;    // noise positions z in [z_lo, z_hi]
  double z_hi = 1.0;
  std::size_t stride_t = 4;
  std::size_t stride_x = 4;
};

struct MalliavinMatrix {
  std::size_t d = 0;
  std::vector<double> sigma;  // row-major d x d
  double det = 0.0;
  std::size_t cells = 0;      // sampled noise cells
  double operator()(std::size_t i, std::size_t j) const { return sigma[i * d + j]; }
};

/// sigma_ij = sum over sampled cells (r, z) in the window of D u(t, x_i) D u(t, x_j) dr dz,
/// each sampled cell weighted by stride_t stride_x dt dx. A cell belongs to the
/// window when its center does.
MalliavinMatrix malliavin_matrix(const MildScheme& scheme, const SolutionField& base, const NoisePath& noise,
                                 const DiffusionCoefficient& rho, const std::vector<double>& points,
                                 const MalliavinWindow& window, const SchemeOptions& opts = {});

/// Determinant by LU with partial pivoting.
double determinant(std::vector<double> a, std::size_t d);

}  // namespace fracspde
