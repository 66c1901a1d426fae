#include "commands.h"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "fracspde/errors.h"
#include "fracspde/localization.h"
#include "fracspde/moment_kernel.h"
#include "fracspde/special_fn.h"

namespace fracspde::cli {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSV with a comment line carrying tool version, digest and seed, and the
// digest repeated as the last column of every row.
class Csv {
 public:
  Csv(std::ostream& os, const RunConfig& rc, std::vector<std::string> cols) : os_(os), digest_(rc.digest) {
    os_ << "# fracspde " << kToolVersion << " " << rc.subcommand << " digest=" << rc.digest
        << " seed=" << rc.master_seed << "\n";
    for (const auto& c : cols) os_ << c << ",";
    os_ << "digest\n";
  }
  void row(std::initializer_list<double> v) { row(std::vector<double>(v)); }
  void row(const std::vector<double>& v) {
    for (double e : v) os_ << fmt(e) << ",";
    os_ << digest_ << "\n";
  }

 private:
  std::ostream& os_;
  std::string digest_;
};

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

std::vector<double> doubles(const json& j) { return j.get<std::vector<double>>(); }

void write_summary(const RunConfig& rc, json summary) {
  const std::string path = rc.params.value("summary", "");
  if (path.empty()) return;
  summary["version"] = kToolVersion;
  summary["subcommand"] = rc.subcommand;
  summary["digest"] = rc.digest;
  summary["seed"] = rc.master_seed;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write summary file " + path);
  f << summary.dump(2) << "\n";
}

KernelTable load_table(const json& p) {
  const StableParams sp = stable_params(p);
  const std::string cache = p.value("cache", "");
  if (!cache.empty() && std::filesystem::exists(cache)) {
    KernelTable t = KernelTable::load(cache);
    if (t.params().alpha == sp.alpha && t.params().delta == sp.delta) return t;
  }
  KernelTable t = default_kernel_table(sp);
  if (!cache.empty()) t.save(cache);
  return t;
}

// Model objects shared by the path-simulating subcommands.
struct Setup {
  KernelTable table;
  SpaceTimeGrid grid;
  DiffusionCoefficient rho;
  InitialMeasure mu;
  std::optional<DriftField> drift;
  SchemeOptions opts;
  std::unique_ptr<MildScheme> scheme;

  Setup(const json& p, double t_needed)
      : table(load_table(p)), rho(make_rho(p.at("rho"))), mu(make_mu(p.at("mu"))) {
    const double dt = p.at("dt");
    // Extend the horizon to whole rows covering t_needed.
    const double T = std::max(p.at("T").get<double>(), std::ceil(t_needed / dt - 1e-9) * dt);
    grid = make_grid(T, dt, p.at("L"), p.at("dx"));
    scheme = std::make_unique<MildScheme>(table, grid, mu);
    opts.positivity_clip = p.at("positivity_clip");
    if (!p.at("drift").is_null()) {
      const auto& d = p.at("drift");
      const int n = d.at("n");
      drift = drift_field(n, doubles(d.at("points")), doubles(d.at("z")), p.at("T"), grid, c_norm(table, n));
      opts.drift = &*drift;
    }
  }
};

void cmd_kernel(const RunConfig& rc, std::ostream& out) {
  const auto& p = rc.params;
  const KernelTable table = load_table(p);
  Csv csv(out, rc, {"t", "x", "G", "envelope"});
  for (double t : doubles(p.at("t")))
    for (double x : linspace(p.at("x_min"), p.at("x_max"), p.at("n_x")))
      csv.row({t, x, kernel_value(table, t, x), tail_envelope(table, t, x)});
}

void cmd_mittag(const RunConfig& rc, std::ostream& out) {
  const auto& p = rc.params;
  MittagParams mp;
  mp.a = p.at("a");
  mp.b = p.at("b");
  Csv csv(out, rc, {"z", "f"});
  for (double z : doubles(p.at("z"))) csv.row({z, mittag_leffler(mp, z)});
}

void cmd_gronwall(const RunConfig& rc, std::ostream& out) {
  const auto& p = rc.params;
  ResolventSpec s{p.at("alpha"), p.at("lambda")};
  const double dt = p.at("dt");
  const double T = p.at("T");
  const auto n = static_cast<std::size_t>(std::llround(T / dt)) + 1;
  const std::vector<double> beta(n, p.at("beta").get<double>());
  const auto f = p.at("epsilon").is_null() ? gronwall_solve(s, dt, beta) : contraction_solve(s, T, p.at("epsilon"), dt, beta);
  Csv csv(out, rc, {"t", "f"});
  for (std::size_t k = 0; k < f.size(); ++k) csv.row({static_cast<double>(k) * dt, f[k]});
}

void cmd_moments(const RunConfig& rc, std::ostream& out) {
  const auto& p = rc.params;
  const KernelTable table = load_table(p);
  const auto grid = make_grid(p.at("T"), p.at("dt"), p.at("L"), p.at("dx"));
  const double lambda = p.at("lambda");
  const auto series = k_lambda_series(table, lambda, grid, p.at("n_terms"), rc.threads);
  const bool heat = table.params().alpha == 2.0;
  Csv csv(out, rc, {"t", "x", "K_series", "K_closed", "ratio"});
  for (std::size_t k = 0; k < grid.n_t; ++k)
    for (double x : doubles(p.at("points"))) {
      const std::size_t i = grid.node_at(x);
      const double t = grid.t(k);
      const double ks = sample_in_time(series.kernel, t, i);
      const double kc = heat ? k_lambda_heat_closed(lambda, t, grid.x(i)) : std::nan("");
      csv.row({t, grid.x(i), ks, kc, ks / kc});
    }
}

void cmd_simulate(const RunConfig& rc, std::ostream& out) {
  const auto& p = rc.params;
  Setup s(p, p.at("T"));
  const auto& g = s.grid;
  std::vector<std::size_t> rows, nodes;
  for (double t : doubles(p.at("times"))) rows.push_back(g.row_at(t));
  for (double x : doubles(p.at("points"))) nodes.push_back(g.node_at(x));
  const json& mall = p.at("malliavin");
  const bool binary = p.at("format") == "binary";
  if (binary && !mall.is_null()) throw ConfigError({"/format: binary output carries solution values only"});

  std::vector<std::pair<std::size_t, std::size_t>> cells;
  std::optional<MalliavinWindow> window;
  if (!mall.is_null() && mall.contains("cells"))
    for (const auto& c : mall.at("cells")) {
      const double r = c[0];
      const auto cell = static_cast<std::size_t>(std::clamp(std::floor(r / g.dt), 0.0, static_cast<double>(g.n_t - 1)));
      cells.emplace_back(cell, g.node_at(c[1].get<double>()));
    }
  if (!mall.is_null() && mall.contains("window")) {
    const auto w = make_observable({{"kind", "det_sigma"}, {"t", p.at("T")}, {"window", mall.at("window")}}).window;
    window = w;
  }

  const std::size_t nu = rows.size() * nodes.size();
  const std::size_t d = nodes.size();
  const std::size_t dim = nu + nu * cells.size() + (window ? 2 + d * d : 0);
  std::vector<double> point_list;
  for (std::size_t i : nodes) point_list.push_back(g.x(i));
  const auto ens = run_paths(*s.scheme, s.rho, s.opts, p.at("paths"), rc.master_seed, dim,
                             [&](std::size_t, const SolutionField& sol, const NoisePath& noise, std::span<double> o) {
                               std::size_t c = 0;
                               for (std::size_t r : rows)
                                 for (std::size_t i : nodes) o[c++] = sol.u(r, i);
                               for (const auto& [cell, node] : cells) {
                                 const auto D = s.scheme->malliavin(sol, noise, s.rho, cell, node, s.opts);
                                 for (std::size_t r : rows)
                                   for (std::size_t i : nodes) o[c++] = D(r, i);
                               }
                               if (window) {
                                 const auto m = malliavin_matrix(*s.scheme, sol, noise, s.rho, point_list, *window, s.opts);
                                 o[c++] = m.det;
                                 o[c++] = static_cast<double>(m.cells);
                                 for (double v : m.sigma) o[c++] = v;
                               }
                             },
                             rc.threads);

  if (binary) {
    // Header: "FSPDOBS1", u32 version, u32 zero, u64 paths, u64 columns,
    // char[16] digest, u64 seed, then (t, x) per column, then column-major
    // values (NaN for failed paths). All little-endian.
    const std::uint32_t version = 1, zero = 0;
    const std::uint64_t paths = ens.size(), cols = nu, seed = rc.master_seed;
    out.write("FSPDOBS1", 8);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&zero), 4);
    out.write(reinterpret_cast<const char*>(&paths), 8);
    out.write(reinterpret_cast<const char*>(&cols), 8);
    out.write(rc.digest.data(), 16);
    out.write(reinterpret_cast<const char*>(&seed), 8);
    for (std::size_t r : rows)
      for (std::size_t i : nodes) {
        const double tx[2] = {g.t(r), g.x(i)};
        out.write(reinterpret_cast<const char*>(tx), 16);
      }
    for (std::size_t c = 0; c < nu; ++c)
      for (std::size_t q = 0; q < paths; ++q) out.write(reinterpret_cast<const char*>(&ens.samples[q * dim + c]), 8);
    return;
  }

  if (window) {
    std::vector<std::string> cols = {"path", "t", "det", "cells"};
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cols.push_back("sigma_" + std::to_string(i) + std::to_string(j));
    Csv csv(out, rc, cols);
    for (std::size_t q = 0; q < ens.size(); ++q) {
      std::vector<double> v = {static_cast<double>(q), window->t};
      const auto smp = ens.sample(q);
      v.insert(v.end(), smp.begin() + static_cast<std::ptrdiff_t>(nu), smp.end());
      csv.row(v);
    }
    return;
  }
  std::vector<std::string> cols = {"path", "t", "x", "u"};
  if (!cells.empty()) cols.insert(cols.end(), {"r", "z", "Du"});
  Csv csv(out, rc, cols);
  for (std::size_t q = 0; q < ens.size(); ++q) {
    const auto smp = ens.sample(q);
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = 0; b < nodes.size(); ++b) {
        const double u = smp[a * nodes.size() + b];
        const std::vector<double> base = {static_cast<double>(q), g.t(rows[a]), g.x(nodes[b]), u};
        if (cells.empty()) {
          csv.row(base);
          continue;
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
          auto v = base;
          v.insert(v.end(), {static_cast<double>(cells[c].first) * g.dt, g.x(cells[c].second),
                             smp[nu + c * nu + a * nodes.size() + b]});
          csv.row(v);
        }
      }
  }
}

void cmd_psi(const RunConfig& rc, std::ostream& out) {
  const auto& p = rc.params;
  const KernelTable table = load_table(p);
  Csv csv(out, rc, {"n", "t", "x", "psi"});
  // Times t_min + (T - t_min) k / n_t, k = 1..n_t: Psi needs t > 0.
  const double t_min = p.at("t_min"), T = p.at("T");
  const std::size_t n_t = p.at("n_t");
  std::vector<double> ts;
  for (std::size_t k = 1; k <= n_t; ++k) ts.push_back(t_min + (T - t_min) * static_cast<double>(k) / static_cast<double>(n_t));
  const auto xs = linspace(p.at("x_min"), p.at("x_max"), p.at("n_x"));
  for (double n : doubles(p.at("n"))) {
    const auto spec = make_psi_spec(table, static_cast<int>(n), p.at("T"), doubles(p.at("points")));
    for (double t : ts)
      for (double x : xs) csv.row({n, t, x, psi_sum(table, spec, t, x)});
  }
}

double horizon(const ObservableSpec& o) {
  double t = o.t;
  for (double h : o.lags) t = std::max(t, o.t + h);
  return t;
}

json ensemble_summary(const Ensemble& e) {
  json s = {{"paths", e.size()}, {"failures", e.failures()}, {"dim", e.dim}};
  json means = json::array();
  for (std::size_t c = 0; c < e.dim; ++c) {
    const auto col = e.column(c);
    double m = 0;
    for (double v : col) m += v;
    means.push_back(col.empty() ? std::nan("") : m / static_cast<double>(col.size()));
  }
  s["means"] = means;
  return s;
}

void cmd_density(const RunConfig& rc, std::ostream& out) {
  const auto& p = rc.params;
  const ObservableSpec obs = make_observable(p.at("observable"));
  Setup s(p, horizon(obs));
  const auto ens = run_ensemble(*s.scheme, s.rho, obs, p.at("paths"), rc.master_seed, s.opts, rc.threads, rc.digest);
  std::vector<double> ok;
  for (std::size_t q = 0; q < ens.size(); ++q)
    if (!ens.failed[q]) ok.insert(ok.end(), ens.sample(q).begin(), ens.sample(q).end());
  const auto est = kde(ok, ens.dim, p.at("grid_points"));
  std::vector<std::string> cols;
  for (std::size_t a = 0; a < est.dim; ++a) cols.push_back("x" + std::to_string(a));
  cols.push_back("density");
  Csv csv(out, rc, cols);
  std::vector<std::size_t> idx(est.dim, 0);
  for (double v : est.values) {
    std::vector<double> r;
    for (std::size_t a = 0; a < est.dim; ++a) r.push_back(est.axes[a][idx[a]]);
    r.push_back(v);
    csv.row(r);
    for (std::size_t a = est.dim; a-- > 0;) {
      if (++idx[a] < est.axes[a].size()) break;
      idx[a] = 0;
    }
  }
  json sum = ensemble_summary(ens);
  sum["bandwidth"] = est.bandwidth;
  sum["mass"] = est.mass();
  if (ens.dim == 1) {
    json nm = json::array();
    for (const auto& m : negative_moment(ens.column(0), {0.5, 1.0, 2.0}))
      nm.push_back({{"p", m.p}, {"value", m.value}, {"se", m.se}, {"unstable", m.unstable},
                    {"nonpositive_fraction", m.nonpositive_fraction}});
    sum["negative_moments"] = nm;
  }
  write_summary(rc, sum);
}

void cmd_smallball(const RunConfig& rc, std::ostream& out) {
  const auto& p = rc.params;
  const ObservableSpec obs = make_observable(p.at("observable"));
  Setup s(p, horizon(obs));
  const auto ens = run_ensemble(*s.scheme, s.rho, obs, p.at("paths"), rc.master_seed, s.opts, rc.threads, rc.digest);
  const auto eps = doubles(p.at("eps"));
  const auto col = ens.column(0);
  const auto curve = obs.kind == ObservableKind::det_sigma ? det_sigma_smallball(col, eps) : small_ball(col, eps);
  Csv csv(out, rc, {"eps", "hits", "n", "p", "lo", "hi"});
  for (const auto& c : curve)
    csv.row({c.threshold, static_cast<double>(c.hits), static_cast<double>(c.n), c.p, c.lo, c.hi});
  const auto shape = log_log_shape(curve);
  json sum = ensemble_summary(ens);
  sum["decreasing"] = shape.decreasing;
  sum["concave"] = shape.concave;
  sum["finite_points"] = shape.finite_points;
  sum["slopes"] = shape.slopes;
  write_summary(rc, sum);
}

void cmd_t0(const RunConfig& rc, std::ostream& out) {
  const auto& p = rc.params;
  const KernelTable table = load_table(p);
  const auto s = linspace(p.at("s_min"), p.at("s_max"), p.at("n_s"));
  const auto y = linspace(p.at("y_min"), p.at("y_max"), p.at("n_y"));
  const double tol = p.at("zero_tol");
  const double t0 = estimate_t0(make_rho(p.at("rho")), make_mu(p.at("mu")), table, s, y, tol);
  Csv csv(out, rc, {"t0", "zero_tol", "s_min", "s_max", "n_s"});
  csv.row({t0, tol, s.front(), s.back(), static_cast<double>(s.size())});
}

void cmd_holder(const RunConfig& rc, std::ostream& out) {
  const auto& p = rc.params;
  const auto lags = doubles(p.at("lags"));
  const double t = p.at("t");
  Setup s(p, t + *std::max_element(lags.begin(), lags.end()));
  const auto fit = holder_exponent(*s.scheme, s.rho, t, p.at("x"), lags, p.at("paths"), rc.master_seed, s.opts,
                                   rc.threads);
  Csv csv(out, rc, {"lag", "norm", "slope", "se", "ci_lo", "ci_hi"});
  for (std::size_t i = 0; i < fit.lags.size(); ++i) csv.row({fit.lags[i], fit.norms[i], fit.slope, fit.se, fit.ci_lo, fit.ci_hi});
  write_summary(rc, {{"slope", fit.slope}, {"se", fit.se}, {"ci", {fit.ci_lo, fit.ci_hi}}, {"paths", fit.paths},
                     {"lags", fit.lags}, {"norms", fit.norms}});
}

}  // namespace

void run(const RunConfig& rc, std::ostream& out) {
  const std::string& s = rc.subcommand;
  if (s == "kernel") return cmd_kernel(rc, out);
  if (s == "mittag") return cmd_mittag(rc, out);
  if (s == "gronwall") return cmd_gronwall(rc, out);
  if (s == "moments") return cmd_moments(rc, out);
  if (s == "simulate") return cmd_simulate(rc, out);
  if (s == "psi") return cmd_psi(rc, out);
  if (s == "density") return cmd_density(rc, out);
  if (s == "smallball") return cmd_smallball(rc, out);
  if (s == "t0") return cmd_t0(rc, out);
  if (s == "holder") return cmd_holder(rc, out);
  throw ConfigError({"unknown subcommand '" + s + "'"});
}

}  // namespace fracspde::cli
