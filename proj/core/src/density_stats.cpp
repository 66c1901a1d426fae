#include "fracspde/density_stats.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <numbers>
#include <thread>

#include "fracspde/errors.h"

namespace fracspde {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t exact_row(const SpaceTimeGrid& g, double t) {
  const std::size_t k = g.row_at(t);
  if (std::abs(g.t(k) - t) > 1e-9 * std::max(1.0, t)) throw ContractError("observable time is not a grid time");
  return k;
}

std::size_t exact_node(const SpaceTimeGrid& g, double x) {
  const std::size_t i = g.node_at(x);
  if (std::abs(g.x(i) - x) > 1e-9 * std::max(1.0, std::abs(x))) throw ContractError("observable point is not a grid node");
  return i;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? kNaN : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double trapezoid_weight(std::size_t j, std::size_t n, double h) { return (j == 0 || j + 1 == n) ? 0.5 * h : h; }

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

std::string config_digest(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::size_t observable_dim(const ObservableSpec& spec) {
  switch (spec.kind) {
    case ObservableKind::point_values: return spec.points.size();
    case ObservableKind::infimum: return 1;
    case ObservableKind::increments: return spec.lags.size();
    case ObservableKind::det_sigma: return 1;
  }
  return 0;
}

void extract_observable(const MildScheme& scheme, const SolutionField& sol, const NoisePath& noise,
                        const DiffusionCoefficient& rho, const SchemeOptions& opts, const ObservableSpec& spec,
                        std::span<double> out) {
  const auto& g = sol.grid();
  if (out.size() != observable_dim(spec)) throw ContractError("extract_observable: output size mismatch");
  switch (spec.kind) {
    case ObservableKind::point_values: {
      const std::size_t k = exact_row(g, spec.t);
      for (std::size_t q = 0; q < spec.points.size(); ++q) out[q] = sol.u(k, exact_node(g, spec.points[q]));
      return;
    }
    case ObservableKind::infimum: {
      const std::size_t k = exact_row(g, spec.t);
      double m = INFINITY;
      for (std::size_t i = 0; i < g.n_x; ++i)
        if (g.x(i) >= spec.k_lo - 1e-12 && g.x(i) <= spec.k_hi + 1e-12) m = std::min(m, sol.u(k, i));
      if (!std::isfinite(m)) throw ContractError("extract_observable: empty infimum window");
      out[0] = m;
      return;
    }
    case ObservableKind::increments: {
      if (spec.points.size() != 1) throw ContractError("extract_observable: increments need one point");
      const std::size_t i = exact_node(g, spec.points[0]);
      const std::size_t k = exact_row(g, spec.t);
      for (std::size_t q = 0; q < spec.lags.size(); ++q)
        out[q] = sol.u(exact_row(g, spec.t + spec.lags[q]), i) - sol.u(k, i);
      return;
    }
    case ObservableKind::det_sigma:
      out[0] = malliavin_matrix(scheme, sol, noise, rho, spec.points, spec.window, opts).det;
      return;
  }
}

std::size_t Ensemble::failures() const noexcept {
  return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), std::uint8_t{1}));
}

std::vector<double> Ensemble::column(std::size_t c) const {
  std::vector<double> out;
  out.reserve(size());
  for (std::size_t p = 0; p < size(); ++p)
    if (!failed[p]) out.push_back(samples[p * dim + c]);
  return out;
}

Ensemble run_paths(const MildScheme& scheme, const DiffusionCoefficient& rho, const SchemeOptions& opts,
                   std::size_t paths, std::uint64_t master_seed, std::size_t dim, const PathObserver& per_path,
                   int threads) {
  if (paths < 1) throw ContractError("run_paths: need at least one path");
  Ensemble e;
  e.dim = dim;
  e.samples.assign(paths * dim, kNaN);
  e.failed.assign(paths, 0);
  e.master_seed = master_seed;
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  auto work = [&](std::size_t first) {
    for (std::size_t p = first; p < paths; p += workers) {
      const auto noise = sample_noise(master_seed, p, scheme.grid());
      std::span<double> row(e.samples.data() + p * dim, dim);
      try {
        const auto sol = scheme.simulate(rho, noise, opts);
        per_path(p, sol, noise, row);
      } catch (const DivergenceError&) {
        e.failed[p] = 1;
        std::fill(row.begin(), row.end(), kNaN);
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  return e;
}

Ensemble run_ensemble(const MildScheme& scheme, const DiffusionCoefficient& rho, const ObservableSpec& spec,
                      std::size_t paths, std::uint64_t master_seed, const SchemeOptions& opts, int threads,
                      std::string digest) {
  if (paths < 2) throw ContractError("run_ensemble: need at least two paths");
  auto e = run_paths(
      scheme, rho, opts, paths, master_seed, observable_dim(spec),
      [&](std::size_t, const SolutionField& sol, const NoisePath& noise, std::span<double> out) {
        extract_observable(scheme, sol, noise, rho, opts, spec, out);
      },
      threads);
  e.kind = spec.kind;
  e.digest = std::move(digest);
  return e;
}

double DensityEstimate::mass() const {
  if (values.empty()) return 0.0;
  double acc = 0.0;
  std::vector<std::size_t> idx(dim, 0);
  for (std::size_t q = 0; q < values.size(); ++q) {
    double w = values[q];
    for (std::size_t a = 0; a < dim; ++a) {
      const auto& ax = axes[a];
      w *= trapezoid_weight(idx[a], ax.size(), ax[1] - ax[0]);
    }
    acc += w;
    for (std::size_t a = dim; a-- > 0;) {
      if (++idx[a] < axes[a].size()) break;
      idx[a] = 0;
    }
  }
  return acc;
}

double kde_value(const std::vector<double>& samples, std::size_t dim, const std::vector<double>& bandwidth,
                 std::span<const double> at) {
  const std::size_t n = samples.size() / dim;
  double norm = 1.0;
  for (double h : bandwidth) norm *= h * std::sqrt(2.0 * std::numbers::pi);
  double acc = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    double q = 0.0;
    for (std::size_t a = 0; a < dim; ++a) {
      const double z = (at[a] - samples[s * dim + a]) / bandwidth[a];
      q += z * z;
    }
    if (q < 80.0) acc += std::exp(-0.5 * q);
  }
  return acc / (static_cast<double>(n) * norm);
}

DensityEstimate kde(const std::vector<double>& samples, std::size_t dim, std::size_t grid_points) {
  if (dim < 1 || dim > 3) throw ContractError("kde: dimension must be 1, 2 or 3");
  if (samples.size() % dim != 0) throw ContractError("kde: sample array not a multiple of the dimension");
  const std::size_t n = samples.size() / dim;
  if (n < 100) throw ContractError("kde: need at least 100 samples");
  if (grid_points == 0) grid_points = dim == 1 ? 512 : (dim == 2 ? 64 : 24);
  DensityEstimate est;
  est.dim = dim;
  for (std::size_t a = 0; a < dim; ++a) {
    std::vector<double> col(n);
    for (std::size_t s = 0; s < n; ++s) col[s] = samples[s * dim + a];
    const double sd = sd_of(col);
    if (!(sd > 0.0)) throw ContractError("kde: degenerate (zero-variance) sample");
    double h;
    if (dim == 1) {
      const double iqr = quantile(col, 0.75) - quantile(col, 0.25);
      const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
      h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
    } else {
      h = sd * std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(dim) + 4.0));
    }
    est.bandwidth.push_back(h);
    const auto [mn, mx] = std::minmax_element(col.begin(), col.end());
    const double lo = *mn - 5.0 * h, hi = *mx + 5.0 * h;
    std::vector<double> ax(grid_points);
    for (std::size_t j = 0; j < grid_points; ++j)
      ax[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(grid_points - 1);
    est.axes.push_back(std::move(ax));
  }
  std::size_t total = 1;
  for (const auto& ax : est.axes) total *= ax.size();
  est.values.resize(total);
  std::vector<std::size_t> idx(dim, 0);
  std::vector<double> at(dim);
  for (std::size_t q = 0; q < total; ++q) {
    for (std::size_t a = 0; a < dim; ++a) at[a] = est.axes[a][idx[a]];
    est.values[q] = kde_value(samples, dim, est.bandwidth, at);
    for (std::size_t a = dim; a-- > 0;) {
      if (++idx[a] < est.axes[a].size()) break;
      idx[a] = 0;
    }
  }
  return est;
}

Proportion wilson(std::size_t hits, std::size_t n, double z) {
  Proportion r;
  r.hits = hits;
  r.n = n;
  if (n == 0) {
    r.p = kNaN;
    r.lo = 0.0;
    r.hi = 1.0;
    return r;
  }
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nn;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / (1 + z2 / nn);
  r.p = p;
  r.lo = std::max(0.0, centre - half);
  r.hi = std::min(1.0, centre + half);
  return r;
}

std::vector<Proportion> small_ball(const std::vector<double>& samples, const std::vector<double>& eps_list) {
  std::vector<Proportion> out;
  for (double eps : eps_list) {
    std::size_t hits = 0, n = 0;
    for (double x : samples) {
      if (std::isnan(x)) continue;
      ++n;
      hits += x < eps;
    }
    auto r = wilson(hits, n);
    r.threshold = eps;
    out.push_back(r);
  }
  return out;
}

std::vector<Proportion> det_sigma_smallball(const std::vector<double>& dets, const std::vector<double>& eps_list) {
  return small_ball(dets, eps_list);
}

ShapeDiagnostic log_log_shape(const std::vector<Proportion>& curve) {
  ShapeDiagnostic d;
  std::vector<Proportion> c = curve;
  std::sort(c.begin(), c.end(), [](const Proportion& a, const Proportion& b) { return a.threshold > b.threshold; });
  std::vector<double> x, y;
  bool zero_seen = false, zero_then_positive = false;
  for (const auto& pt : c) {
    if (pt.hits == 0) {
      zero_seen = true;
      continue;
    }
    if (zero_seen) zero_then_positive = true;
    x.push_back(-std::log(pt.threshold));
    y.push_back(std::log(pt.p));
  }
  d.finite_points = x.size();
  d.decreasing = !zero_then_positive;
  for (std::size_t i = 0; i + 1 < y.size(); ++i) {
    d.slopes.push_back((y[i + 1] - y[i]) / (x[i + 1] - x[i]));
    if (y[i + 1] > y[i]) d.decreasing = false;
  }
  d.concave = !zero_then_positive;
  for (std::size_t i = 0; i + 1 < d.slopes.size(); ++i)
    if (d.slopes[i + 1] > d.slopes[i]) d.concave = false;
  return d;
}

std::vector<NegativeMoment> negative_moment(const std::vector<double>& samples, const std::vector<double>& p_list) {
  std::vector<double> pos;
  std::size_t nonpos = 0, total = 0;
  for (double x : samples) {
    if (std::isnan(x)) continue;
    ++total;
    if (x > 0.0)
      pos.push_back(x);
    else
      ++nonpos;
  }
  std::vector<NegativeMoment> out;
  for (double p : p_list) {
    NegativeMoment r;
    r.p = p;
    r.used = pos.size();
    r.nonpositive_fraction = total ? static_cast<double>(nonpos) / static_cast<double>(total) : 0.0;
    if (pos.size() >= 2) {
      std::vector<double> y(pos.size());
      for (std::size_t i = 0; i < pos.size(); ++i) y[i] = std::pow(pos[i], -p);
      const double n = static_cast<double>(y.size());
      const double sum = std::accumulate(y.begin(), y.end(), 0.0);
      r.value = sum / n;
      // Delete-one jackknife of the mean.
      double acc = 0.0;
      for (double v : y) {
        const double loo = (sum - v) / (n - 1.0);
        acc += (loo - r.value) * (loo - r.value);
      }
      r.se = std::sqrt((n - 1.0) / n * acc);
      std::sort(y.begin(), y.end(), std::greater<>());
      const auto top = static_cast<std::size_t>(std::ceil(0.01 * n));
      r.top_share = std::accumulate(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(top), 0.0) / sum;
      r.unstable = r.top_share > 0.5;
    }
    out.push_back(r);
  }
  return out;
}

double estimate_t0(const DiffusionCoefficient& rho, const InitialMeasure& mu, const KernelTable& table,
                   const std::vector<double>& s_grid, const std::vector<double>& y_grid, double zero_tol) {
  std::vector<double> s = s_grid;
  std::sort(s.begin(), s.end());
  for (double t : s) {
    if (!(t > 0.0)) throw DomainError("estimate_t0: grid times must be positive");
    for (double y : y_grid)
      if (std::abs(rho(t, y, j0_value(mu, table, t, y))) > zero_tol) return t;
  }
  return std::numeric_limits<double>::infinity();
}

HolderFit holder_fit(const std::vector<double>& increments, const std::vector<double>& lags) {
  const std::size_t L = lags.size();
  if (L < 3) throw ContractError("holder_fit: need at least 3 lags");
  if (increments.size() % L != 0) throw ContractError("holder_fit: sample array not a multiple of the lag count");
  std::vector<std::vector<double>> sq;  // per valid path, squared increments
  for (std::size_t p = 0; p < increments.size() / L; ++p) {
    std::vector<double> row(L);
    bool ok = true;
    for (std::size_t l = 0; l < L; ++l) {
      const double v = increments[p * L + l];
      ok = ok && std::isfinite(v);
      row[l] = v * v;
    }
    if (ok) sq.push_back(std::move(row));
  }
  const std::size_t n = sq.size();
  if (n < 3) throw ContractError("holder_fit: need at least 3 valid paths");
  std::vector<double> sums(L, 0.0), logh(L);
  for (const auto& row : sq)
    for (std::size_t l = 0; l < L; ++l) sums[l] += row[l];
  for (std::size_t l = 0; l < L; ++l) logh[l] = std::log(lags[l]);
  auto slope_from = [&](const std::vector<double>& s, double count) {
    std::vector<double> y(L);
    for (std::size_t l = 0; l < L; ++l) y[l] = 0.5 * std::log(s[l] / count);
    return ols_slope(logh, y);
  };
  HolderFit fit;
  fit.lags = lags;
  fit.paths = n;
  fit.slope = slope_from(sums, static_cast<double>(n));
  for (std::size_t l = 0; l < L; ++l) fit.norms.push_back(std::sqrt(sums[l] / static_cast<double>(n)));
  std::vector<double> loo(n), s(L);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t l = 0; l < L; ++l) s[l] = sums[l] - sq[p][l];
    loo[p] = slope_from(s, static_cast<double>(n - 1));
  }
  const double m = mean_of(loo);
  double acc = 0.0;
  for (double v : loo) acc += (v - m) * (v - m);
  fit.se = std::sqrt((static_cast<double>(n) - 1.0) / static_cast<double>(n) * acc);
  fit.ci_lo = fit.slope - 1.959963984540054 * fit.se;
  fit.ci_hi = fit.slope + 1.959963984540054 * fit.se;
  return fit;
}

HolderFit holder_exponent(const MildScheme& scheme, const DiffusionCoefficient& rho, double t, double x,
                          const std::vector<double>& lags, std::size_t paths, std::uint64_t master_seed,
                          const SchemeOptions& opts, int threads) {
  if (lags.size() < 3) throw ContractError("holder_exponent: need at least 3 lags");
  ObservableSpec spec;
  spec.kind = ObservableKind::increments;
  spec.t = t;
  spec.points = {x};
  spec.lags = lags;
  const auto e = run_ensemble(scheme, rho, spec, paths, master_seed, opts, threads);
  return holder_fit(e.samples, lags);
}

}  // namespace fracspde
