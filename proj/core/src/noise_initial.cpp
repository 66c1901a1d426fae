#include "fracspde/noise_initial.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "fracspde/errors.h"
#include "fracspde/special_fn.h"

namespace fracspde {

namespace {

constexpr std::array<double, 4> kGl4Nodes = {-0.8611363115940526, -0.3399810435848563,
                                             0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kGl4Weights = {0.3478548451374538, 0.6521451548625461,
                                               0.6521451548625461, 0.3478548451374538};
constexpr std::array<double, 8> kGl8Nodes = {-0.9602898564975363, -0.7966664774136267,
                                             -0.5255324099163290, -0.1834346424956498,
                                             0.1834346424956498,  0.5255324099163290,
                                             0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGl8Weights = {0.1012285362903763, 0.2223810344533745,
                                               0.3137066458778873, 0.3626837833783620,
                                               0.3626837833783620, 0.3137066458778873,
                                               0.2223810344533745, 0.1012285362903763};

constexpr int kFirstCellPanels = 10;

bool same_location(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

// Atoms with equal locations merged, sorted by location.
std::vector<DiracAtom> merged_atoms(std::vector<DiracAtom> atoms) {
  std::sort(atoms.begin(), atoms.end(),
            [](const DiracAtom& a, const DiracAtom& b) { return a.location < b.location; });
  std::vector<DiracAtom> out;
  for (const auto& a : atoms) {
    if (!out.empty() && same_location(out.back().location, a.location))
      out.back().mass += a.mass;
    else
      out.push_back(a);
  }
  return out;
}

// Breakpoints of all pieces with the jump of the density across each.
struct Jump {
  double at;
  double size;
};

std::vector<Jump> density_jumps(const InitialMeasure& mu) {
  std::vector<Jump> jumps;
  for (const auto& p : mu.pieces()) {
    double prev = 0.0;
    for (std::size_t j = 0; j < p.values.size(); ++j) {
      const double v = p.values[j];
      if (v != prev) jumps.push_back({p.x0 + static_cast<double>(j) * p.h, v - prev});
      prev = v;
    }
    if (prev != 0.0) jumps.push_back({p.right(), -prev});
  }
  return jumps;
}

// sum_j c_j F(z_j) with sum_j c_j = 0, written so that both far-left and
// far-right evaluations only touch small tail probabilities.
double jump_sum(const KernelTable& table, const std::vector<Jump>& jumps, double x, double scale) {
  double left = 0.0, left_coeff = 0.0, right = 0.0;
  for (const auto& jmp : jumps) {
    const double z = (x - jmp.at) * scale;
    if (z < 0.0) {
      left += jmp.size * table.cdf(z);
      left_coeff += jmp.size;
    } else {
      right += jmp.size * table.ccdf(z);
    }
  }
  return left - left_coeff - right;
}

double j0_point(const InitialMeasure& mu, const std::vector<Jump>& jumps, const KernelTable& table,
                double t, double x) {
  double v = mu.background();
  for (const auto& a : mu.atoms()) v += a.mass * kernel_value(table, t, x - a.location);
  if (!jumps.empty()) v += jump_sum(table, jumps, x, std::pow(t, -1.0 / table.params().alpha));
  return v;
}

double density_point(const InitialMeasure& mu, const std::vector<Jump>& jumps, const KernelTable& table,
                     double t, double x) {
  double v = mu.background();
  if (!jumps.empty()) v += jump_sum(table, jumps, x, std::pow(t, -1.0 / table.params().alpha));
  return v;
}

std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

double unit_open_closed(std::uint32_t a, std::uint32_t b) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(a) << 32) | b) >> 11;
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;  // (0, 1]
}

double unit_closed_open(std::uint32_t a, std::uint32_t b) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(a) << 32) | b) >> 11;
  return static_cast<double>(bits) * 0x1.0p-53;  // [0, 1)
}

std::array<double, 2> normal_pair(const NoiseKey& key, std::uint64_t k, std::uint64_t pair) {
  const auto r = philox4x32({lo32(pair), lo32(k), lo32(key.path_index), hi32(key.path_index)},
                            {lo32(key.master_seed), hi32(key.master_seed)});
  const double radius = std::sqrt(-2.0 * std::log(unit_open_closed(r[0], r[1])));
  const double theta = 2.0 * std::numbers::pi * unit_closed_open(r[2], r[3]);
  return {radius * std::cos(theta), radius * std::sin(theta)};
}

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

InitialMeasure InitialMeasure::dirac(double location, double mass) {
  return atoms({{location, mass}});
}

InitialMeasure InitialMeasure::atoms(std::vector<DiracAtom> atoms) {
  for (const auto& a : atoms)
    if (!std::isfinite(a.location) || !std::isfinite(a.mass))
      throw DomainError("InitialMeasure: non-finite atom");
  InitialMeasure m;
  m.atoms_ = std::move(atoms);
  return m;
}

InitialMeasure InitialMeasure::lebesgue(double level) {
  if (!std::isfinite(level)) throw DomainError("InitialMeasure: non-finite level");
  InitialMeasure m;
  m.background_ = level;
  return m;
}

InitialMeasure InitialMeasure::indicator(double a, double b, double level) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
    throw DomainError("InitialMeasure::indicator: need finite a < b");
  return sampled(a, b - a, {level});
}

InitialMeasure InitialMeasure::sampled(double x0, double h, std::vector<double> values) {
  if (!(h > 0.0) || !std::isfinite(x0) || !std::isfinite(h))
    throw DomainError("InitialMeasure::sampled: need finite x0 and h > 0");
  for (double v : values)
    if (!std::isfinite(v)) throw DomainError("InitialMeasure::sampled: non-finite value");
  InitialMeasure m;
  m.pieces_.push_back({x0, h, std::move(values)});
  return m;
}

InitialMeasure InitialMeasure::operator+(const InitialMeasure& other) const {
  InitialMeasure m = *this;
  m.atoms_.insert(m.atoms_.end(), other.atoms_.begin(), other.atoms_.end());
  m.pieces_.insert(m.pieces_.end(), other.pieces_.begin(), other.pieces_.end());
  m.background_ += other.background_;
  return m;
}

InitialMeasure InitialMeasure::scaled(double c) const {
  if (!std::isfinite(c)) throw DomainError("InitialMeasure::scaled: non-finite factor");
  InitialMeasure m = *this;
  for (auto& a : m.atoms_) a.mass *= c;
  for (auto& p : m.pieces_)
    for (auto& v : p.values) v *= c;
  m.background_ *= c;
  return m;
}

InitialMeasure::Kind InitialMeasure::kind() const noexcept {
  const bool has_atoms = std::any_of(atoms_.begin(), atoms_.end(), [](const DiracAtom& a) { return a.mass != 0.0; });
  bool has_density = background_ != 0.0;
  for (const auto& p : pieces_)
    has_density = has_density || std::any_of(p.values.begin(), p.values.end(), [](double v) { return v != 0.0; });
  if (has_atoms && has_density) return Kind::combination;
  if (has_atoms) return Kind::dirac;
  if (has_density) return Kind::density;
  return Kind::zero;
}

double InitialMeasure::density_at(double x) const noexcept {
  double v = background_;
  for (const auto& p : pieces_) {
    if (x < p.left() || x >= p.right()) continue;
    auto j = static_cast<std::size_t>(std::floor((x - p.x0) / p.h));
    v += p.values[std::min(j, p.values.size() - 1)];
  }
  return v;
}

bool InitialMeasure::is_nonnegative() const noexcept {
  double scale = std::abs(background_);
  for (const auto& a : atoms_) scale = std::max(scale, std::abs(a.mass));
  for (const auto& p : pieces_)
    for (double v : p.values) scale = std::max(scale, std::abs(v));
  const double tol = 1e-12 * scale;
  for (const auto& a : merged_atoms(atoms_))
    if (a.mass < -tol) return false;
  std::vector<double> cuts;
  for (const auto& p : pieces_)
    for (std::size_t j = 0; j <= p.values.size(); ++j) cuts.push_back(p.x0 + static_cast<double>(j) * p.h);
  std::sort(cuts.begin(), cuts.end());
  if (background_ < -tol) return false;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    if (cuts[c + 1] <= cuts[c]) continue;
    if (density_at(0.5 * (cuts[c] + cuts[c + 1])) < -tol) return false;
  }
  return true;
}

bool dominates(const InitialMeasure& mu1, const InitialMeasure& mu2) {
  return (mu1 + mu2.scaled(-1.0)).is_nonnegative();
}

AdmissibilityReport check_admissible(const InitialMeasure& mu, const StableParams& params,
                                     const std::vector<double>& probe_grid, double cap) {
  validate(params);
  AdmissibilityReport rep;
  const double background = std::abs(mu.background());
  if (params.alpha == 2.0) {
    const std::array<double, 3> cs = {1.0, 0.1, 0.01};
    for (std::size_t c = 0; c < cs.size(); ++c) {
      const double rc = std::sqrt(cs[c]);
      double acc = background * std::sqrt(std::numbers::pi / cs[c]);
      for (const auto& a : mu.atoms()) acc += std::abs(a.mass) * std::exp(-cs[c] * a.location * a.location);
      for (const auto& p : mu.pieces()) {
        for (std::size_t j = 0; j < p.values.size(); ++j) {
          const double lo = p.x0 + static_cast<double>(j) * p.h;
          acc += std::abs(p.values[j]) * 0.5 * std::sqrt(std::numbers::pi / cs[c]) *
                 (std::erf(rc * (lo + p.h)) - std::erf(rc * lo));
        }
      }
      rep.gaussian_moments[c] = acc;
    }
    const double worst = *std::max_element(rep.gaussian_moments.begin(), rep.gaussian_moments.end());
    rep.sup_value = worst;
    rep.admissible = std::isfinite(worst) && worst <= cap;
    if (!rep.admissible) rep.reason = "Gaussian-weighted total variation exceeds the cap";
    return rep;
  }
  if (probe_grid.empty()) throw ContractError("check_admissible: empty probe grid");
  const double p = 1.0 + params.alpha;
  auto weight = [p](double d) { return 1.0 / (1.0 + std::pow(std::abs(d), p)); };
  // int_R dz / (1 + |z|^p) = 2 (pi/p) / sin(pi/p)
  const double line_integral = 2.0 * (std::numbers::pi / p) / std::sin(std::numbers::pi / p);
  rep.sup_value = -1.0;
  for (double y : probe_grid) {
    double acc = background * line_integral;
    for (const auto& a : mu.atoms()) acc += std::abs(a.mass) * weight(y - a.location);
    for (const auto& piece : mu.pieces()) {
      for (std::size_t j = 0; j < piece.values.size(); ++j) {
        if (piece.values[j] == 0.0) continue;
        const double lo = piece.x0 + static_cast<double>(j) * piece.h;
        double cell = 0.0;
        for (std::size_t g = 0; g < kGl4Nodes.size(); ++g)
          cell += kGl4Weights[g] * weight(y - (lo + 0.5 * piece.h * (kGl4Nodes[g] + 1.0)));
        acc += std::abs(piece.values[j]) * 0.5 * piece.h * cell;
      }
    }
    if (!(acc <= rep.sup_value)) {
      rep.sup_value = acc;
      rep.argmax = y;
    }
  }
  rep.admissible = std::isfinite(rep.sup_value) && rep.sup_value <= cap;
  if (!rep.admissible) rep.reason = "weighted total variation exceeds the cap at a probe point";
  return rep;
}

double j0_value(const InitialMeasure& mu, const KernelTable& table, double t, double x) {
  if (!(t > 0.0)) throw DomainError("j0_value: t must be positive");
  return j0_point(mu, density_jumps(mu), table, t, x);
}

SpaceTimeField j0_field(const InitialMeasure& mu, const KernelTable& table, const SpaceTimeGrid& grid) {
  const auto jumps = density_jumps(mu);
  SpaceTimeField out(grid);
  for (std::size_t k = 0; k < grid.n_t; ++k)
    for (std::size_t i = 0; i < grid.n_x; ++i) out(k, i) = j0_point(mu, jumps, table, grid.t(k), grid.x(i));
  return out;
}

SpaceTimeField j0_squared_field(const InitialMeasure& mu, const KernelTable& table, const SpaceTimeGrid& grid) {
  const auto jumps = density_jumps(mu);
  const bool has_density = mu.background() != 0.0 || !jumps.empty();
  std::size_t atom_count = 0;
  for (const auto& a : mu.atoms()) atom_count += a.mass != 0.0 ? 1 : 0;
  const double parts = static_cast<double>(atom_count + (has_density ? 1 : 0));
  const double alpha = table.params().alpha;
  const double dt = grid.dt;
  const double hx = 0.5 * grid.dx;
  SpaceTimeField out(grid);
  if (parts == 0.0) return out;
  for (std::size_t i = 0; i < grid.n_x; ++i) {
    const double xc = grid.x(i);
    // First row: Cauchy-Schwarz over the parts.
    double first = 0.0;
    for (const auto& a : mu.atoms())
      if (a.mass != 0.0) first += a.mass * a.mass * g_squared_cell_average(table, dt, grid.dx, 0, xc - a.location);
    if (has_density) {
      // The density part is bounded, so plain graded panels in time suffice.
      const double q = alpha / (alpha - 1.0);
      double acc = 0.0;
      double lo = 0.0;
      for (int panel = 0; panel < kFirstCellPanels; ++panel) {
        const double hi = std::ldexp(1.0, panel + 1 - kFirstCellPanels);
        for (std::size_t g = 0; g < kGl8Nodes.size(); ++g) {
          const double v = lo + 0.5 * (hi - lo) * (kGl8Nodes[g] + 1.0);
          const double s = dt * std::pow(v, q);
          const double ds = q * std::pow(v, q - 1.0);  // ds / (dt dv)
          double sp = 0.0;
          for (std::size_t h = 0; h < kGl4Nodes.size(); ++h) {
            const double d = density_point(mu, jumps, table, s, xc + hx * kGl4Nodes[h]);
            sp += 0.5 * kGl4Weights[h] * d * d;
          }
          acc += 0.5 * (hi - lo) * kGl8Weights[g] * ds * sp;
        }
        lo = hi;
      }
      first += acc;
    }
    out(0, i) = parts * first;
    for (std::size_t k = 1; k < grid.n_t; ++k) {
      const double t0 = static_cast<double>(k) * dt;
      double acc = 0.0;
      for (std::size_t g = 0; g < kGl8Nodes.size(); ++g) {
        const double s = t0 + 0.5 * dt * (kGl8Nodes[g] + 1.0);
        double sp = 0.0;
        for (std::size_t h = 0; h < kGl4Nodes.size(); ++h) {
          const double v = j0_point(mu, jumps, table, s, xc + hx * kGl4Nodes[h]);
          sp += 0.5 * kGl4Weights[h] * v * v;
        }
        acc += 0.5 * kGl8Weights[g] * sp;
      }
      out(k, i) = acc;
    }
  }
  return out;
}

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> key) {
  constexpr std::uint64_t m0 = 0xD2511F53u;
  constexpr std::uint64_t m1 = 0xCD9E8D57u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = m0 * c[0];
    const std::uint64_t p1 = m1 * c[2];
    c = {hi32(p1) ^ c[1] ^ key[0], lo32(p1), hi32(p0) ^ c[3] ^ key[1], lo32(p0)};
    key[0] += 0x9E3779B9u;
    key[1] += 0xBB67AE85u;
  }
  return c;
}

double standard_normal(const NoiseKey& key, std::uint64_t k, std::uint64_t j) {
  return normal_pair(key, k, j >> 1)[j & 1];
}

double noise_increment(const NoiseKey& key, std::uint64_t k, std::uint64_t j, double dt, double dx) {
  return std::sqrt(dt * dx) * standard_normal(key, k, j);
}

NoisePath sample_noise(std::uint64_t master_seed, std::uint64_t path_index, const SpaceTimeGrid& grid) {
  NoisePath path{{master_seed, path_index}, SpaceTimeField(grid)};
  const double sd = std::sqrt(grid.dt * grid.dx);
  for (std::size_t k = 0; k < grid.n_t; ++k) {
    auto row = path.increments.row(k);
    for (std::size_t j = 0; j < grid.n_x; j += 2) {
      const auto z = normal_pair(path.key, k, j >> 1);
      row[j] = sd * z[0];
      if (j + 1 < grid.n_x) row[j + 1] = sd * z[1];
    }
  }
  return path;
}

DriftField drift_field(int n, const std::vector<double>& points, const std::vector<double>& z, double T,
                       const SpaceTimeGrid& grid, double c_n) {
  if (n < 0) throw DomainError("drift_field: n must be nonnegative");
  if (points.size() != z.size()) throw ContractError("drift_field: points and z differ in length");
  const double r = std::ldexp(1.0, -n);
  const double tgrid = static_cast<double>(grid.n_t) * grid.dt;
  if (!(T > 0.0) || T > tgrid * (1.0 + 1e-12)) throw ContractError("drift_field: T outside the grid");
  if (r > T * (1.0 + 1e-12)) throw ContractError("drift_field: time window reaches below 0");
  std::vector<double> sorted = points;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
    if (sorted[i + 1] - sorted[i] < 2.0 * r) throw ContractError("drift_field: spatial windows overlap");
  const double xmax = static_cast<double>(grid.half) * grid.dx + 0.5 * grid.dx;
  for (double x : points)
    if (std::abs(x) + r > xmax) throw ContractError("drift_field: spatial window leaves the grid");

  DriftField d{n, T, c_n, points, z, SpaceTimeField(grid)};
  for (std::size_t k = 0; k < grid.n_t; ++k) {
    const double tf = overlap(static_cast<double>(k) * grid.dt, grid.t(k), T - r, T) / grid.dt;
    if (tf == 0.0) continue;
    for (std::size_t p = 0; p < points.size(); ++p) {
      const std::size_t lo = grid.node_at(points[p] - r);
      const std::size_t hi = grid.node_at(points[p] + r);
      for (std::size_t i = lo; i <= hi; ++i) {
        const double xc = grid.x(i);
        const double sf = overlap(xc - 0.5 * grid.dx, xc + 0.5 * grid.dx, points[p] - r, points[p] + r) / grid.dx;
        d.values(k, i) += z[p] * c_n * tf * sf;
      }
    }
  }
  return d;
}

}  // namespace fracspde
