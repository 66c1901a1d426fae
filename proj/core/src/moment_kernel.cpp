#include "fracspde/moment_kernel.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "fracspde/errors.h"
#include "fracspde/fft.h"
#include "fracspde/special_fn.h"

namespace fracspde {

namespace {

constexpr std::array<double, 8> kGl8Nodes = {-0.9602898564975363, -0.7966664774136267,
                                             -0.5255324099163290, -0.1834346424956498,
                                             0.1834346424956498,  0.5255324099163290,
                                             0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGl8Weights = {0.1012285362903763, 0.2223810344533745,
                                               0.3137066458778873, 0.3626837833783620,
                                               0.3626837833783620, 0.3137066458778873,
                                               0.2223810344533745, 0.1012285362903763};

constexpr int kFirstCellPanels = 10;

// Spectra of every row of a lag kernel, reused across many convolutions.
class LagKernelSpectra {
 public:
  LagKernelSpectra(const SpaceTimeField& g)
      : grid_(g.grid()), conv_(grid_.n_x, grid_.half), spectra_(grid_.n_t) {
    for (std::size_t l = 0; l < grid_.n_t; ++l) {
      const auto row = g.row(l);
      if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) continue;
      spectra_[l] = conv_.kernel_spectrum(row);
    }
  }

  SpaceTimeField apply(const SpaceTimeField& f, int threads) const {
    if (!same_grid(f.grid(), grid_)) throw ContractError("spacetime_convolve: grid mismatch");
    const std::size_t nt = grid_.n_t;
    const std::size_t ns = conv_.spectrum_size();
    std::vector<SpectralConvolver::Spectrum> fs(nt);
    {
      auto ws = conv_.make_workspace();
      for (std::size_t j = 0; j < nt; ++j) {
        const auto row = f.row(j);
        if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) continue;
        conv_.forward(row, ws);
        fs[j].assign(ws.spectrum.data(), ws.spectrum.data() + ns);
      }
    }
    SpaceTimeField out(grid_);
    const double cell = grid_.dt * grid_.dx;
    auto work = [&](std::size_t first, std::size_t stride) {
      auto ws = conv_.make_workspace();
      std::vector<Complex> acc(ns);
      for (std::size_t a = first; a < nt; a += stride) {
        std::fill(acc.begin(), acc.end(), Complex{});
        bool any = false;
        for (std::size_t j = 0; j <= a; ++j) {
          const auto& fj = fs[j];
          const auto& gl = spectra_[a - j];
          if (fj.empty() || gl.empty()) continue;
          any = true;
          for (std::size_t q = 0; q < ns; ++q) acc[q] += fj[q] * gl[q];
        }
        if (!any) continue;
        std::copy(acc.begin(), acc.end(), ws.spectrum.data());
        auto row = out.row(a);
        conv_.inverse(ws, row);
        for (double& v : row) v *= cell;
      }
    };
    const auto n_workers = static_cast<std::size_t>(std::max(1, threads));
    if (n_workers == 1) {
      work(0, 1);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work, w, n_workers);
    }
    return out;
  }

 private:
  SpaceTimeGrid grid_;
  SpectralConvolver conv_;
  std::vector<SpectralConvolver::Spectrum> spectra_;
};

}  // namespace

std::size_t SpaceTimeGrid::row_at(double time) const {
  const double k = std::round(time / dt) - 1.0;
  return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(n_t - 1)));
}

std::size_t SpaceTimeGrid::node_at(double pos) const {
  const double i = std::round(pos / dx) + static_cast<double>(half);
  return static_cast<std::size_t>(std::clamp(i, 0.0, static_cast<double>(n_x - 1)));
}

SpaceTimeGrid make_grid(double T, double dt, double L, double dx) {
  if (!(T > 0.0) || !(dt > 0.0) || !(L > 0.0) || !(dx > 0.0))
    throw DomainError("make_grid: T, dt, L and dx must be positive");
  SpaceTimeGrid g;
  g.T = T;
  g.dt = dt;
  g.L = L;
  g.dx = dx;
  const double nt = std::round(T / dt);
  const double half = std::round(L / dx);
  if (nt < 1.0 || half < 1.0) throw DomainError("make_grid: grid has no interior cells");
  g.n_t = static_cast<std::size_t>(nt);
  g.half = static_cast<std::size_t>(half);
  g.n_x = 2 * g.half + 1;
  return g;
}

bool same_grid(const SpaceTimeGrid& a, const SpaceTimeGrid& b) {
  return a.n_t == b.n_t && a.n_x == b.n_x && a.dt == b.dt && a.dx == b.dx;
}

double SpaceTimeField::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::fabs(v));
  return m;
}

SpaceTimeField spacetime_convolve(const SpaceTimeField& f, const SpaceTimeField& g, int threads) {
  if (!same_grid(f.grid(), g.grid())) throw ContractError("spacetime_convolve: grid mismatch");
  return LagKernelSpectra(g).apply(f, threads);
}

double g_squared_cell_average(const KernelTable& table, double dt, double dx, std::size_t k, double xc) {
  const double alpha = table.params().alpha;
  const double inv_a = 1.0 / alpha;
  const double hx = 0.5 * dx;
  // int over the spatial cell of G(s,.)^2 = s^{-1/alpha} int G(1,.)^2 over the rescaled cell.
  auto spatial = [&](double s) {
    const double sc = std::pow(s, -inv_a);
    return table.square_mass_between((xc - hx) * sc, (xc + hx) * sc);
  };
  if (k == 0) {
    // s = dt v^q makes ds s^{-1/alpha} = dt^{1-1/alpha} q dv. The remaining
    // factor still changes quickly near v = 0, so use graded panels.
    const double q = alpha / (alpha - 1.0);
    double first = 0.0;
    double lo = 0.0;
    for (int panel = 0; panel < kFirstCellPanels; ++panel) {
      const double hi = std::ldexp(1.0, panel + 1 - kFirstCellPanels);
      for (std::size_t g = 0; g < kGl8Nodes.size(); ++g) {
        const double v = lo + 0.5 * (hi - lo) * (kGl8Nodes[g] + 1.0);
        first += 0.5 * (hi - lo) * kGl8Weights[g] * spatial(dt * std::pow(v, q));
      }
      lo = hi;
    }
    return first * std::pow(dt, 1.0 - inv_a) * q / (dt * dx);
  }
  const double t0 = static_cast<double>(k) * dt;
  double acc = 0.0;
  for (std::size_t g = 0; g < kGl8Nodes.size(); ++g) {
    const double s = t0 + 0.5 * dt * (kGl8Nodes[g] + 1.0);
    acc += 0.5 * kGl8Weights[g] * std::pow(s, -inv_a) * spatial(s);
  }
  return acc / dx;
}

SpaceTimeField g_squared_field(const KernelTable& table, const SpaceTimeGrid& grid) {
  SpaceTimeField out(grid);
  for (std::size_t k = 0; k < grid.n_t; ++k)
    for (std::size_t i = 0; i < grid.n_x; ++i)
      out(k, i) = g_squared_cell_average(table, grid.dt, grid.dx, k, grid.x(i));
  return out;
}

SpaceTimeField right_end_to_cell_average(const SpaceTimeField& f) {
  SpaceTimeField out(f.grid());
  const auto& g = f.grid();
  for (std::size_t k = 0; k < g.n_t; ++k)
    for (std::size_t i = 0; i < g.n_x; ++i)
      out(k, i) = 0.5 * (f(k, i) + (k > 0 ? f(k - 1, i) : 0.0));
  return out;
}

double sample_in_time(const SpaceTimeField& cell_averages, double t, std::size_t i) {
  const auto& g = cell_averages.grid();
  const double c = t / g.dt - 0.5;
  if (c <= 0.0 || g.n_t == 1) return cell_averages(0, i);
  auto k = static_cast<std::size_t>(std::floor(c));
  k = std::min(k, g.n_t - 2);
  const double w = c - static_cast<double>(k);
  return (1.0 - w) * cell_averages(k, i) + w * cell_averages(k + 1, i);
}

KLambdaSeries k_lambda_series(const KernelTable& table, double lambda, const SpaceTimeGrid& grid,
                              int n_terms, int threads) {
  if (n_terms < 1) throw DomainError("k_lambda_series: n_terms must be at least 1");
  if (!(lambda >= 0.0)) throw DomainError("k_lambda_series: lambda must be nonnegative");
  SpaceTimeField base = g_squared_field(table, grid);
  const double l2 = lambda * lambda;
  for (double& v : base.values()) v *= l2;

  KLambdaSeries out;
  out.kernel = base;
  out.term_norms.push_back(base.max_abs());
  if (n_terms > 1) {
    const LagKernelSpectra lag(base);
    SpaceTimeField term = base;
    for (int n = 1; n < n_terms; ++n) {
      term = right_end_to_cell_average(lag.apply(term, threads));
      auto& acc = out.kernel.values();
      const auto& tv = term.values();
      for (std::size_t q = 0; q < acc.size(); ++q) acc[q] += tv[q];
      const double norm = term.max_abs();
      if (!std::isfinite(norm)) throw AccuracyError("k_lambda_series: partial sums overflow", norm);
      out.term_norms.push_back(norm);
    }
  }
  const std::size_t m = out.term_norms.size();
  if (m >= 2 && out.term_norms[m - 2] > 0.0) {
    const double r = out.term_norms[m - 1] / out.term_norms[m - 2];
    out.truncation_ratio = r;
    out.truncation_estimate =
        r < 1.0 ? out.term_norms[m - 1] * r / (1.0 - r) : std::numeric_limits<double>::infinity();
  }
  return out;
}

double k_lambda_heat_closed(double lambda, double t, double x) {
  if (!(t > 0.0)) throw DomainError("k_lambda_heat_closed: t must be positive");
  const double pi = std::numbers::pi;
  const double l2 = lambda * lambda;
  const double l4 = l2 * l2;
  const double at_zero =
      (l2 / std::sqrt(8.0 * pi * t) + 0.25 * l4 * std::exp(l4 * t / 8.0) * normal_cdf(0.5 * l2 * std::sqrt(t))) /
      std::sqrt(2.0 * pi * t);
  return at_zero * std::exp(-x * x / (2.0 * t));
}

SpaceTimeField second_moment_bound(const SpaceTimeField& j0_squared, const KernelTable& table,
                                   double lambda, double varsigma, int n_terms, int threads) {
  if (!(varsigma >= 0.0)) throw DomainError("second_moment_bound: varsigma must be nonnegative");
  for (double v : j0_squared.values())
    if (!std::isfinite(v)) throw DomainError("second_moment_bound: J0^2 must be finite");
  const auto& grid = j0_squared.grid();
  SpaceTimeField source(grid);
  const double s2 = varsigma * varsigma;
  for (std::size_t q = 0; q < source.values().size(); ++q)
    source.values()[q] = s2 + 2.0 * j0_squared.values()[q];
  SpaceTimeField out(grid);
  for (std::size_t q = 0; q < out.values().size(); ++q) out.values()[q] = 2.0 * j0_squared.values()[q];
  if (source.max_abs() == 0.0 || lambda == 0.0) return out;
  const auto k = k_lambda_series(table, lambda, grid, n_terms, threads);
  const auto conv = right_end_to_cell_average(LagKernelSpectra(k.kernel).apply(source, threads));
  for (std::size_t q = 0; q < out.values().size(); ++q) out.values()[q] += conv.values()[q];
  return out;
}

}  // namespace fracspde
