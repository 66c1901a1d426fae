#include "fracspde/spde_solver.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <thread>

#include "fracspde/errors.h"

namespace fracspde {

namespace {

void check_finite_row(std::span<const double> row, std::size_t k) {
  for (std::size_t i = 0; i < row.size(); ++i)
    if (!std::isfinite(row[i]))
      throw DivergenceError("non-finite value at row " + std::to_string(k) + ", node " + std::to_string(i), k, i);
}

std::vector<double> reversed(const std::vector<double>& taps) { return {taps.rbegin(), taps.rend()}; }

double drift_term(const SchemeOptions& opts, std::size_t cell, std::size_t j, double cell_area) {
  return opts.drift ? opts.drift->values(cell, j) * cell_area : 0.0;
}

}  // namespace

DiffusionCoefficient DiffusionCoefficient::pam(double lambda) {
  DiffusionCoefficient r;
  r.kind_ = Kind::pam;
  r.scale_ = lambda;
  r.lip_ = std::abs(lambda);
  return r;
}

DiffusionCoefficient DiffusionCoefficient::constant(double c) {
  DiffusionCoefficient r;
  r.kind_ = Kind::constant;
  r.scale_ = c;
  // |c| <= Lip (varsigma + |z|) with Lip = 1, varsigma = |c|.
  r.lip_ = 1.0;
  r.varsigma_ = std::abs(c);
  return r;
}

DiffusionCoefficient DiffusionCoefficient::sine(double a) {
  DiffusionCoefficient r;
  r.kind_ = Kind::sine;
  r.scale_ = a;
  r.lip_ = std::abs(a);
  return r;
}

DiffusionCoefficient DiffusionCoefficient::abs_sine(double a) {
  DiffusionCoefficient r = sine(a);
  r.kind_ = Kind::abs_sine;
  return r;
}

DiffusionCoefficient DiffusionCoefficient::custom(Fn f, std::optional<Fn> derivative, double lip, double varsigma) {
  if (!f) throw ContractError("DiffusionCoefficient::custom: empty function");
  if (!(lip >= 0.0) || !(varsigma >= 0.0)) throw DomainError("DiffusionCoefficient::custom: negative constant");
  DiffusionCoefficient r;
  r.kind_ = Kind::custom;
  r.fn_ = std::move(f);
  r.deriv_ = std::move(derivative);
  r.lip_ = lip;
  r.varsigma_ = varsigma;
  return r;
}

bool DiffusionCoefficient::has_derivative() const noexcept {
  return kind_ == Kind::pam || kind_ == Kind::constant || kind_ == Kind::sine ||
         (kind_ == Kind::custom && deriv_.has_value() && *deriv_);
}

double DiffusionCoefficient::derivative(double t, double x, double z) const {
  switch (kind_) {
    case Kind::pam: return scale_;
    case Kind::constant: return 0.0;
    case Kind::sine: return scale_ * std::cos(z);
    case Kind::abs_sine: break;
    case Kind::custom:
      if (deriv_ && *deriv_) return (*deriv_)(t, x, z);
      break;
  }
  throw ContractError("DiffusionCoefficient: derivative not available");
}

double DiffusionCoefficient::spot_check(std::size_t samples) const {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> ut(0.0, 2.0), ux(-10.0, 10.0), uz(-50.0, 50.0);
  double worst = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const double t = ut(rng), x = ux(rng), z1 = uz(rng), z2 = uz(rng);
    const double r1 = (*this)(t, x, z1), r2 = (*this)(t, x, z2);
    const double growth = lip_ * (varsigma_ + std::abs(z1));
    const double lipschitz = lip_ * std::abs(z1 - z2);
    worst = std::max(worst, growth > 0 ? std::abs(r1) / growth : (r1 == 0.0 ? 0.0 : INFINITY));
    worst = std::max(worst, lipschitz > 0 ? std::abs(r1 - r2) / lipschitz : 0.0);
  }
  return worst;
}

MildScheme::MildScheme(const KernelTable& table, const SpaceTimeGrid& grid, const InitialMeasure& mu)
    : table_(&table), grid_(grid), conv_(grid.n_x, grid.n_x - 1) {
  if (grid.n_t == 0 || grid.n_x < 2) throw ContractError("MildScheme: empty grid");
  const double alpha = table.params().alpha;
  const double inv_a = 1.0 / alpha;
  if (grid.dx > std::pow(grid.dt, inv_a) * (1.0 + 1e-12))
    throw ContractError("MildScheme: dx must resolve the one-step kernel (dx <= dt^{1/alpha})");
  std::vector<double> probes;
  for (std::size_t i = 0; i < grid.n_x; i += std::max<std::size_t>(1, grid.n_x / 64)) probes.push_back(grid.x(i));
  const auto adm = check_admissible(mu, table.params(), probes);
  if (!adm.admissible) throw ContractError("MildScheme: initial measure not admissible: " + adm.reason);

  j0_ = j0_field(mu, table, grid);

  const std::size_t w = grid.n_x - 1;
  const double b = 1.0 - inv_a;
  tau_ = std::pow(b, alpha) * grid.dt;
  p_taps_.resize(2 * w + 1);
  n_taps_.resize(2 * w + 1);
  const double sp = std::pow(grid.dt, -inv_a);
  const double h = 0.5 * grid.dx;
  double n_sq = 0.0;
  for (std::size_t o = 0; o <= 2 * w; ++o) {
    const double x = (static_cast<double>(o) - static_cast<double>(w)) * grid.dx;
    p_taps_[o] = table.mass_between((x - h) * sp, (x + h) * sp);
    n_taps_[o] = kernel_value(table, tau_, x);
    n_sq += n_taps_[o] * n_taps_[o];
  }
  const double exact = table.square_norm() * std::pow(grid.dt, b) / b;
  const double c = std::sqrt(exact / (grid.dt * grid.dx * n_sq));
  for (double& v : n_taps_) v *= c;

  p_hat_ = conv_.kernel_spectrum(p_taps_);
  n_hat_ = conv_.kernel_spectrum(n_taps_);
  p_hat_t_ = conv_.kernel_spectrum(reversed(p_taps_));
  n_hat_t_ = conv_.kernel_spectrum(reversed(n_taps_));
}

void MildScheme::step(std::span<const double> stochastic, std::span<const double> forcing, std::span<double> out,
                      SpectralConvolver::Workspace& ws, std::vector<Complex>& acc) const {
  const std::size_t ns = conv_.spectrum_size();
  conv_.forward(stochastic, ws);
  for (std::size_t m = 0; m < ns; ++m) acc[m] = ws.spectrum[m] * p_hat_[m];
  conv_.forward(forcing, ws);
  for (std::size_t m = 0; m < ns; ++m) ws.spectrum[m] = acc[m] + ws.spectrum[m] * n_hat_[m];
  conv_.inverse(ws, out);
}

void MildScheme::step_transposed(std::span<const double> adjoint, std::span<double> through_p,
                                 std::span<double> through_n, SpectralConvolver::Workspace& ws) const {
  conv_.convolve(adjoint, p_hat_t_, ws, through_p);
  conv_.convolve(adjoint, n_hat_t_, ws, through_n);
}

SolutionField MildScheme::simulate(const DiffusionCoefficient& rho, const NoisePath& noise,
                                   const SchemeOptions& opts) const {
  if (!same_grid(noise.increments.grid(), grid_)) throw ContractError("simulate: noise grid mismatch");
  if (opts.drift && !same_grid(opts.drift->values.grid(), grid_)) throw ContractError("simulate: drift grid mismatch");
  const std::size_t nx = grid_.n_x;
  const double area = grid_.dt * grid_.dx;
  SolutionField sol{SpaceTimeField(grid_), noise.key, opts.positivity_clip, 0.0, 0};
  std::vector<double> stoch(nx, 0.0), forcing(nx), next(nx);
  auto ws = conv_.make_workspace();
  std::vector<Complex> acc(conv_.spectrum_size());
  std::copy(j0_.row(0).begin(), j0_.row(0).end(), sol.u.row(0).begin());
  check_finite_row(sol.u.row(0), 0);
  for (std::size_t k = 0; k + 1 < grid_.n_t; ++k) {
    const auto u = sol.u.row(k);
    const auto dw = noise.increments.row(k + 1);
    const double t = grid_.t(k);
    for (std::size_t j = 0; j < nx; ++j)
      forcing[j] = rho(t, grid_.x(j), u[j]) * (dw[j] + drift_term(opts, k + 1, j, area));
    step(stoch, forcing, next, ws, acc);
    auto un = sol.u.row(k + 1);
    const auto jn = j0_.row(k + 1);
    for (std::size_t i = 0; i < nx; ++i) {
      un[i] = jn[i] + next[i];
      if (opts.positivity_clip && un[i] < 0.0) {
        sol.clipped_mass -= un[i] * grid_.dx;
        ++sol.clipped_cells;
        un[i] = 0.0;
        next[i] = -jn[i];
      }
    }
    check_finite_row(un, k + 1);
    stoch.swap(next);
  }
  return sol;
}

SpaceTimeField MildScheme::malliavin(const SolutionField& base, const NoisePath& noise,
                                     const DiffusionCoefficient& rho, std::size_t cell, std::size_t node,
                                     const SchemeOptions& opts) const {
  if (!same_grid(base.grid(), grid_) || !same_grid(noise.increments.grid(), grid_))
    throw ContractError("malliavin: grid mismatch");
  if (!rho.has_derivative()) throw ContractError("malliavin: rho has no derivative");
  if (cell == 0 || cell >= grid_.n_t || node >= grid_.n_x)
    throw ContractError("malliavin: source cell outside the noise-driven rows");
  const std::size_t nx = grid_.n_x;
  const std::size_t w = nx - 1;
  const double area = grid_.dt * grid_.dx;
  SpaceTimeField d(grid_);
  const double src = rho(grid_.t(cell - 1), grid_.x(node), base.u(cell - 1, node));
  for (std::size_t i = 0; i < nx; ++i) d(cell, i) = n_taps_[i + w - node] * src;
  std::vector<double> forcing(nx);
  auto ws = conv_.make_workspace();
  std::vector<Complex> acc(conv_.spectrum_size());
  for (std::size_t k = cell; k + 1 < grid_.n_t; ++k) {
    const auto u = base.u.row(k);
    const auto dk = d.row(k);
    const auto dw = noise.increments.row(k + 1);
    const double t = grid_.t(k);
    for (std::size_t j = 0; j < nx; ++j)
      forcing[j] = rho.derivative(t, grid_.x(j), u[j]) * (dw[j] + drift_term(opts, k + 1, j, area)) * dk[j];
    step(dk, forcing, d.row(k + 1), ws, acc);
    check_finite_row(d.row(k + 1), k + 1);
  }
  return d;
}

SpaceTimeField MildScheme::sensitivity(const SolutionField& base, const NoisePath& noise,
                                       const DiffusionCoefficient& rho, std::size_t row, std::size_t node,
                                       const SchemeOptions& opts) const {
  if (!same_grid(base.grid(), grid_) || !same_grid(noise.increments.grid(), grid_))
    throw ContractError("sensitivity: grid mismatch");
  if (!rho.has_derivative()) throw ContractError("sensitivity: rho has no derivative");
  if (row >= grid_.n_t || node >= grid_.n_x) throw ContractError("sensitivity: target outside the grid");
  const std::size_t nx = grid_.n_x;
  const double area = grid_.dt * grid_.dx;
  SpaceTimeField s(grid_);
  std::vector<double> adj(nx, 0.0), via_p(nx), via_n(nx);
  adj[node] = 1.0;
  auto ws = conv_.make_workspace();
  for (std::size_t c = row; c >= 1; --c) {
    step_transposed(adj, via_p, via_n, ws);
    const auto u = base.u.row(c - 1);
    const auto dw = noise.increments.row(c);
    const double t = grid_.t(c - 1);
    auto sc = s.row(c);
    for (std::size_t j = 0; j < nx; ++j) {
      const double x = grid_.x(j);
      sc[j] = rho(t, x, u[j]) * via_n[j];
      adj[j] = via_p[j] + rho.derivative(t, x, u[j]) * (dw[j] + drift_term(opts, c, j, area)) * via_n[j];
    }
  }
  return s;
}

SolutionField simulate_path(const KernelTable& table, const SpaceTimeGrid& grid, const DiffusionCoefficient& rho,
                            const InitialMeasure& mu, const NoisePath& noise, const SchemeOptions& opts) {
  return MildScheme(table, grid, mu).simulate(rho, noise, opts);
}

std::pair<SolutionField, SolutionField> simulate_coupled_pair(const KernelTable& table, const SpaceTimeGrid& grid,
                                                              const DiffusionCoefficient& rho,
                                                              const InitialMeasure& mu1, const InitialMeasure& mu2,
                                                              const NoisePath& noise, const SchemeOptions& opts) {
  if (!mu2.is_nonnegative() || !dominates(mu1, mu2))
    throw ContractError("simulate_coupled_pair: need mu1 >= mu2 >= 0");
  return {simulate_path(table, grid, rho, mu1, noise, opts), simulate_path(table, grid, rho, mu2, noise, opts)};
}

PicardResult picard_solve(const KernelTable& table, const SpaceTimeGrid& grid, const DiffusionCoefficient& rho,
                          const InitialMeasure& mu, const NoisePath& noise, int iterations, int threads) {
  if (iterations < 0) throw DomainError("picard_solve: negative iteration count");
  if (!same_grid(noise.increments.grid(), grid)) throw ContractError("picard_solve: noise grid mismatch");
  const std::size_t nt = grid.n_t, nx = grid.n_x, w = nx - 1;
  const SpectralConvolver conv(nx, w);
  const std::size_t ns = conv.spectrum_size();
  std::vector<SpectralConvolver::Spectrum> lag(nt);
  {
    std::vector<double> taps(2 * w + 1);
    for (std::size_t l = 0; l < nt; ++l) {
      const double s = static_cast<double>(l + 1) * grid.dt;
      for (std::size_t o = 0; o <= 2 * w; ++o)
        taps[o] = kernel_value(table, s, (static_cast<double>(o) - static_cast<double>(w)) * grid.dx);
      lag[l] = conv.kernel_spectrum(taps);
    }
  }
  PicardResult res{j0_field(mu, table, grid), {}};
  const SpaceTimeField j0 = res.u;
  const int workers = std::max(1, threads);
  for (int m = 0; m < iterations; ++m) {
    // Spectra of the forcing rows rho(u_m(c-1)) dW(c), c = 1..nt-1.
    std::vector<SpectralConvolver::Spectrum> f(nt);
    {
      auto ws = conv.make_workspace();
      std::vector<double> row(nx);
      for (std::size_t c = 1; c < nt; ++c) {
        for (std::size_t j = 0; j < nx; ++j)
          row[j] = rho(grid.t(c - 1), grid.x(j), res.u(c - 1, j)) * noise.increments(c, j);
        conv.forward(row, ws);
        f[c].assign(ws.spectrum.data(), ws.spectrum.data() + ns);
      }
    }
    SpaceTimeField next(grid);
    auto work = [&](std::size_t first) {
      auto ws = conv.make_workspace();
      std::vector<double> out(nx);
      for (std::size_t a = first; a < nt; a += static_cast<std::size_t>(workers)) {
        for (std::size_t q = 0; q < ns; ++q) ws.spectrum[q] = 0.0;
        for (std::size_t c = 1; c <= a; ++c)
          for (std::size_t q = 0; q < ns; ++q) ws.spectrum[q] += f[c][q] * lag[a - c][q];
        conv.inverse(ws, out);
        for (std::size_t i = 0; i < nx; ++i) next(a, i) = j0(a, i) + (a > 0 ? out[i] : 0.0);
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (int t = 0; t < workers; ++t) pool.emplace_back(work, static_cast<std::size_t>(t));
    }
    double gap = 0.0;
    for (std::size_t q = 0; q < next.values().size(); ++q)
      gap = std::max(gap, std::abs(next.values()[q] - res.u.values()[q]));
    res.gaps.push_back(gap);
    res.u = std::move(next);
  }
  return res;
}

double determinant(std::vector<double> a, std::size_t d) {
  if (a.size() != d * d) throw ContractError("determinant: size mismatch");
  double det = 1.0;
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < d; ++r)
      if (std::abs(a[r * d + c]) > std::abs(a[piv * d + c])) piv = r;
    if (a[piv * d + c] == 0.0) return 0.0;
    if (piv != c) {
      for (std::size_t k = 0; k < d; ++k) std::swap(a[c * d + k], a[piv * d + k]);
      det = -det;
    }
    det *= a[c * d + c];
    for (std::size_t r = c + 1; r < d; ++r) {
      const double f = a[r * d + c] / a[c * d + c];
      for (std::size_t k = c; k < d; ++k) a[r * d + k] -= f * a[c * d + k];
    }
  }
  return det;
}

MalliavinMatrix malliavin_matrix(const MildScheme& scheme, const SolutionField& base, const NoisePath& noise,
                                 const DiffusionCoefficient& rho, const std::vector<double>& points,
                                 const MalliavinWindow& window, const SchemeOptions& opts) {
  const auto& g = scheme.grid();
  if (points.empty()) throw ContractError("malliavin_matrix: no points");
  if (window.stride_t == 0 || window.stride_x == 0) throw ContractError("malliavin_matrix: zero stride");
  const std::size_t row = g.row_at(window.t);
  std::vector<std::size_t> cells, nodes;
  for (std::size_t c = 1; c <= row; ++c) {
    const double mid = (static_cast<double>(c) + 0.5) * g.dt;
    if (mid >= window.r_lo && mid <= window.r_hi) cells.push_back(c);
  }
  for (std::size_t j = 0; j < g.n_x; ++j)
    if (g.x(j) >= window.z_lo && g.x(j) <= window.z_hi) nodes.push_back(j);
  if (cells.empty() || nodes.empty()) throw ContractError("malliavin_matrix: empty window");

  const std::size_t d = points.size();
  std::vector<SpaceTimeField> sens;
  sens.reserve(d);
  for (double x : points) sens.push_back(scheme.sensitivity(base, noise, rho, row, g.node_at(x), opts));
  MalliavinMatrix out{d, std::vector<double>(d * d, 0.0), 0.0, 0};
  const double weight = static_cast<double>(window.stride_t * window.stride_x) * g.dt * g.dx;
  for (std::size_t a = 0; a < cells.size(); a += window.stride_t)
    for (std::size_t b = 0; b < nodes.size(); b += window.stride_x) {
      ++out.cells;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j)
          out.sigma[i * d + j] += sens[i](cells[a], nodes[b]) * sens[j](cells[a], nodes[b]) * weight;
    }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) out.sigma[i * d + j] = out.sigma[j * d + i];
  out.det = determinant(out.sigma, d);
  return out;
}

}  // namespace fracspde
