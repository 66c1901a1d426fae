#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fracspde/moment_kernel.h"
#include "fracspde/stable_kernel.h"

namespace fracspde {

struct DiracAtom {
  double location = 0.0;
  double mass = 1.0;
};

/// Piecewise-constant density: value[j] on [x0 + j h, x0 + (j+1) h).
struct DensityPiece {
  double x0 = 0.0;
  double h = 1.0;
  std::vector<double> values;

  double left() const noexcept { return x0; }
  double right() const noexcept { return x0 + h * static_cast<double>(values.size()); }
};

/// Signed initial measure: point masses + bounded piecewise-constant densities
/// + a constant background density on the whole line (background 1 is
/// Lebesgue measure). Sums of these cover every kind the tools accept.
class InitialMeasure {
 public:
  enum class Kind { zero, dirac, density, combination };

  static InitialMeasure zero() { return {}; }
  static InitialMeasure dirac(double location = 0.0, double mass = 1.0);
  static InitialMeasure atoms(std::vector<DiracAtom> atoms);
  static InitialMeasure lebesgue(double level = 1.0);
  static InitialMeasure indicator(double a, double b, double level = 1.0);
  static InitialMeasure sampled(double x0, double h, std::vector<double> values);

  InitialMeasure operator+(const InitialMeasure& other) const;
  InitialMeasure scaled(double c) const;

  Kind kind() const noexcept;
  const std::vector<DiracAtom>& atoms() const noexcept { return atoms_; }
  const std::vector<DensityPiece>& pieces() const noexcept { return pieces_; }
  double background() const noexcept { return background_; }

  /// Density part (pieces + background) at x; atoms excluded.
  double density_at(double x) const noexcept;
  bool is_nonnegative() const noexcept;

 private:
  std::vector<DiracAtom> atoms_;
  std::vector<DensityPiece> pieces_;
  double background_ = 0.0;
};

/// True when mu1 - mu2 is a nonnegative measure (atoms matched by location,
/// densities compared on the common refinement of their breakpoints).
bool dominates(const InitialMeasure& mu1, const InitialMeasure& mu2);

struct AdmissibilityReport {
  bool admissible = false;
  /// alpha < 2: sup over the probe grid of int |mu|(dx) / (1 + |y - x|^{1+alpha}).
  double sup_value = 0.0;
  double argmax = 0.0;
  /// alpha = 2: int exp(-c x^2) |mu|(dx) for c = 1, 0.1, 0.01.
  std::array<double, 3> gaussian_moments{};
  std::string reason;
};

/// Diagnostic only: a finite probe grid can certify a lower bound of the sup,
/// not its finiteness. Values above `cap` are treated as divergent.
AdmissibilityReport check_admissible(const InitialMeasure& mu, const StableParams& params,
                                     const std::vector<double>& probe_grid, double cap = 1e50);

/// J0(t,x) = int G(t, x - y) mu(dy): kernel values for atoms, CDF differences
/// for density cells, the constant itself for the background.
double j0_value(const InitialMeasure& mu, const KernelTable& table, double t, double x);

/// J0 at every node time t(k) and node x(i) of the grid.
SpaceTimeField j0_field(const InitialMeasure& mu, const KernelTable& table, const SpaceTimeGrid& grid);

/// Space-time cell averages of J0^2 (time cell (k dt, (k+1) dt], space cell of
/// width dx around x(i)). The first time row uses the Cauchy-Schwarz bound
/// J0^2 <= P sum_p J_p^2 over the P parts (atoms, density), whose cell
/// averages are exact; it is exact for a single atom.
SpaceTimeField j0_squared_field(const InitialMeasure& mu, const KernelTable& table,
                                const SpaceTimeGrid& grid);

/// Stream identity of one noise realization.
struct NoiseKey {
  std::uint64_t master_seed = 0;
  std::uint64_t path_index = 0;
};

/// Philox4x32-10 block: counter and key in, four 32-bit words out.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Standard normal for noise cell (k, j), a pure function of (key, k, j).
double standard_normal(const NoiseKey& key, std::uint64_t k, std::uint64_t j);

/// Increment W of cell (k, j): sqrt(dt dx) * standard_normal(key, k, j).
double noise_increment(const NoiseKey& key, std::uint64_t k, std::uint64_t j, double dt, double dx);

struct NoisePath {
  NoiseKey key;
  SpaceTimeField increments;  // row k = time cell (k dt, (k+1) dt]
};

NoisePath sample_noise(std::uint64_t master_seed, std::uint64_t path_index, const SpaceTimeGrid& grid);

/// <z, h_n(s, y)> sampled on grid cells with area-fraction weights:
/// sum_i z_i c_n 1[T - 2^{-n} <= s <= T] 1[|y - x_i| <= 2^{-n}].
struct DriftField {
  int n = 1;
  double T = 1.0;
  double c_n = 1.0;
  std::vector<double> points;
  std::vector<double> z;
  SpaceTimeField values;
};

DriftField drift_field(int n, const std::vector<double>& points, const std::vector<double>& z, double T,
                       const SpaceTimeGrid& grid, double c_n);

}  // namespace fracspde
