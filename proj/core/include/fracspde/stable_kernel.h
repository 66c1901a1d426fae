#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace fracspde {

/// Order alpha in (1,2] and skewness delta with |delta| <= 2 - alpha.
struct StableParams {
  double alpha = 2.0;
  double delta = 0.0;
};

void validate(const StableParams& p);

struct KernelBuildOptions {
  double mass_tol = 1e-4;
  double imag_tol = 1e-8;
};

/// G(1, .) sampled on the uniform grid x_j = -X + j dx, j = 0..n-1, plus the
/// derived quantities every evaluation needs: tail constant K0, side-specific
/// tail scales, and cumulative integrals of G and G^2. Immutable once built.
class KernelTable {
 public:
  const StableParams& params() const noexcept { return params_; }
  double x_half_width() const noexcept { return half_width_; }
  double x_min() const noexcept { return -half_width_; }
  double dx() const noexcept { return dx_; }
  std::size_t size() const noexcept { return profile_.size(); }
  double x(std::size_t j) const noexcept { return -half_width_ + static_cast<double>(j) * dx_; }
  std::span<const double> profile() const noexcept { return profile_; }
  std::size_t fft_size() const noexcept { return fft_size_; }

  /// K0 with G(1,x) <= K0 / (1 + |x|^{1+alpha}).
  double tail_constant() const noexcept { return tail_constant_; }
  int interpolation_order() const noexcept { return 3; }
  /// Trapezoid mass of the profile over the grid.
  double mass() const noexcept { return mass_; }
  /// Mass of negative round-off removed by clipping.
  double clipped_mass() const noexcept { return clipped_mass_; }
  /// Largest |imaginary part| left by the Fourier inversion.
  double max_imag_residue() const noexcept { return max_imag_; }
  /// Nodes whose values sat below the transform's round-off floor and were
  /// replaced by the scaled tail envelope.
  std::size_t floor_replaced() const noexcept { return floor_replaced_; }

  /// G(1, y): log-cubic interpolation inside the grid, scaled envelope outside.
  double profile_at(double y) const;
  /// int_{-inf}^y G(1,z) dz.
  double cdf(double y) const;
  /// int_y^{inf} G(1,z) dz, accurate deep in the right tail.
  double ccdf(double y) const;
  /// int_a^b G(1,z) dz for a <= b, choosing cdf or ccdf to avoid cancellation.
  double mass_between(double a, double b) const;
  /// int_a^b G(1,z)^2 dz for a <= b.
  double square_mass_between(double a, double b) const;
  /// int G(1,z)^2 dz over the real line.
  double square_norm() const noexcept { return square_total_; }

  void save(const std::filesystem::path& file) const;
  static KernelTable load(const std::filesystem::path& file);

 private:
  friend KernelTable build_kernel_table(const StableParams&, double, std::size_t, std::size_t,
                                        const KernelBuildOptions&);
  KernelTable() = default;
  void finalize();
  double log_interp(double y) const;
  double tail_value(double y) const;
  double cell_integral(std::size_t j, double a, double b, int power) const;
  double left_part(double y, int power) const;
  double right_part(double y, int power) const;

  StableParams params_;
  double half_width_ = 0.0;
  double dx_ = 0.0;
  std::size_t fft_size_ = 0;
  std::vector<double> profile_;
  std::vector<double> log_profile_;
  double tail_constant_ = 0.0;
  double mass_ = 0.0;
  double clipped_mass_ = 0.0;
  double max_imag_ = 0.0;
  std::size_t floor_replaced_ = 0;
  double left_scale_ = 0.0;
  double right_scale_ = 0.0;
  // cum_[p][j] = int from -X to x_j of G^p, rcum_[p][j] = int from x_j to X of G^p.
  std::vector<double> cum_[2];
  std::vector<double> rcum_[2];
  double left_tail_[2] = {0.0, 0.0};
  double right_tail_[2] = {0.0, 0.0};
  double total_ = 1.0;
  double square_total_ = 0.0;
};

/// Fourier inversion of exp(-|xi|^alpha e^{-i pi delta sgn(xi)/2}) at t = 1 on
/// n_points nodes spanning [-x_half_width, x_half_width], using an FFT of
/// length fft_size (power of two, >= 4 n_points). Throws ResolutionError when
/// the grid mass falls outside [1 - mass_tol, 1].
KernelTable build_kernel_table(const StableParams& params, double x_half_width, std::size_t n_points,
                               std::size_t fft_size, const KernelBuildOptions& opts = {});

/// Grid sizing rule: half-width from the stable tail so that the mass outside
/// is below mass_tol / 2, spacing 0.01 (alpha = 2) or 0.02 (alpha < 2).
KernelTable default_kernel_table(const StableParams& params, const KernelBuildOptions& opts = {});

/// (4 pi t)^{-1/2} exp(-x^2 / (4 t)).
double gaussian_kernel(double t, double x);

/// G(t,x) = t^{-1/alpha} G(1, t^{-1/alpha} x).
double kernel_value(const KernelTable& table, double t, double x);

/// Phi_alpha(x) = int_{-inf}^x G(1,y) dy.
double stable_cdf(const KernelTable& table, double x);

/// K0 t / (t^{1+1/alpha} + |x|^{1+alpha}).
double tail_envelope(const KernelTable& table, double t, double x);

}  // namespace fracspde
