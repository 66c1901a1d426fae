#include <doctest.h>

#include "../unit/approx.h"

#include <cstdlib>
#include <sstream>

#include "commands.h"
#include "fracspde/localization.h"
#include "fracspde/special_fn.h"

using namespace fracspde;
using namespace fracspde::cli;

namespace {

std::string run_text(const std::string& sub, const std::string& cfg, std::optional<std::uint64_t> seed = {},
                     int threads = 1) {
  auto rc = parse_config(sub, cfg, seed);
  rc.threads = threads;
  std::ostringstream os;
  run(rc, os);
  return os.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

std::vector<std::string> errors_of(const std::string& sub, const std::string& cfg) {
  try {
    parse_config(sub, cfg);
  } catch (const ConfigError& e) {
    return e.errors();
  }
  return {};
}

bool mentions(const std::vector<std::string>& errs, const std::string& needle) {
  for (const auto& e : errs)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("minimal PAM config gets the documented defaults") {
  const auto rc = parse_config("simulate", R"({"rho": {"kind": "pam", "lambda": 1}})");
  CHECK(rc.params["dt"].get<double>() == 1.0 / 256);
  CHECK(rc.params["dx"].get<double>() == 1.0 / 64);
  CHECK(rc.params["L"].get<double>() == 8.0);
  CHECK(rc.params["alpha"].get<double>() == 2.0);
  CHECK(rc.params["mu"]["kind"] == "dirac");
  CHECK(rc.master_seed == 1);
  CHECK(rc.digest.size() == 16);
  CHECK(parse_config("simulate", "").digest == parse_config("simulate", "{}").digest);
}

TEST_CASE("schema violations are collected with paths") {
  CHECK(mentions(errors_of("kernel", R"({"alpha": 2.5})"), "/alpha: must be in (1,2]"));
  CHECK(mentions(errors_of("simulate", R"({"alpha": 1.8, "delta": 0.3})"), "|delta| must not exceed 2 - alpha"));
  CHECK(errors_of("simulate", R"({"alpha": 1.5, "delta": 0.5})").empty());
  const auto many = errors_of("simulate", R"({"foo": 1, "rho": {"kind": "pam", "bar": 2}, "dt": "x"})");
  CHECK(many.size() == 3);
  CHECK(mentions(many, "/foo: unknown key"));
  CHECK(mentions(many, "/rho/bar: unknown key"));
  CHECK(mentions(many, "/dt: expected a number"));
  CHECK(mentions(errors_of("simulate", R"({"rho": {"kind": "quadratic"}})"), "/rho/kind"));
  CHECK(mentions(errors_of("psi", R"({"n": [1.5]})"), "/n"));
  CHECK(mentions(errors_of("holder", R"({"lags": [0.1, 0.2]})"), "at least 3 lags"));
  CHECK(mentions(errors_of("kernel", "[1, 2"), "syntax"));
  CHECK(mentions(errors_of("nosuch", "{}"), "unknown subcommand"));
  // Keys valid for one subcommand are unknown to another.
  CHECK(mentions(errors_of("kernel", R"({"paths": 3})"), "/paths: unknown key"));
  CHECK(mentions(errors_of("simulate", R"({"mu": {"kind": "sum", "terms": [{"kind": "dirac"}, {"kind": "lebesgue", "x": 1}]}})"),
                 "/mu/terms/1/x: unknown key"));
}

TEST_CASE("digest is canonical and seed-sensitive") {
  const auto a = parse_config("simulate", R"({"dt": 0.0078125, "paths": 4})");
  const auto b = parse_config("simulate", "{\n  \"paths\": 4,\n  \"dt\": 0.0078125 }");
  CHECK(a.digest == b.digest);
  CHECK(a.digest != parse_config("simulate", R"({"dt": 0.0078125, "paths": 5})").digest);
  CHECK(a.digest != parse_config("simulate", R"({"dt": 0.0078125, "paths": 4})", 2).digest);
  CHECK(parse_config("simulate", R"({"seed": 9})").master_seed == 9);
  CHECK(parse_config("simulate", R"({"seed": 9})", 3).master_seed == 3);
}

TEST_CASE("thread budget: flag wins over environment") {
  ::setenv("FRACSPDE_THREADS", "3", 1);
  CHECK(resolve_threads(std::nullopt) == 3);
  CHECK(resolve_threads(2) == 2);
  ::setenv("FRACSPDE_THREADS", "many", 1);
  CHECK_THROWS_AS(resolve_threads(std::nullopt), ConfigError);
  ::unsetenv("FRACSPDE_THREADS");
  CHECK(resolve_threads(std::nullopt) == 1);
  CHECK_THROWS_AS(resolve_threads(0), ConfigError);
}

TEST_CASE("kernel subcommand reproduces the heat kernel") {
  const auto rows = csv_rows(run_text("kernel", R"({"t": [0.1, 1.0], "n_x": 41})"));
  REQUIRE(rows.size() == 83);
  CHECK(rows[0] == std::vector<std::string>{"t", "x", "G", "envelope", "digest"});
  double worst = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const double t = std::stod(rows[r][0]), x = std::stod(rows[r][1]);
    worst = std::max(worst, std::abs(std::stod(rows[r][2]) - gaussian_kernel(t, x)));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("mittag and gronwall subcommands") {
  const auto m = csv_rows(run_text("mittag", R"({"a": 1, "b": 1, "z": [1, 2]})"));
  CHECK(std::stod(m[1][1]) == rel(std::exp(1.0)).epsilon(1e-12));
  CHECK(std::stod(m[2][1]) == rel(std::exp(2.0)).epsilon(1e-12));
  const auto g = csv_rows(run_text("gronwall", R"({"alpha": 2, "lambda": 1, "beta": 1, "T": 1, "dt": 0.001953125})"));
  const ResolventSpec s{2.0, 1.0};
  CHECK(std::stod(g.back()[1]) == rel(gronwall_constant_solution(s, 1.0, 1.0)).epsilon(1e-4));
}

TEST_CASE("psi subcommand emits the localization surfaces") {
  const std::string text = run_text("psi", R"({"n_t": 16, "n_x": 41})");
  const auto rows = csv_rows(text);
  REQUIRE(rows.size() == 1 + 3 * 16 * 41);
  const auto tb = default_kernel_table({2.0, 0.0});
  for (int n = 1; n <= 3; ++n) {
    const auto spec = make_psi_spec(tb, n, 1.0, {0.0});
    double peak = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (std::stoi(rows[r][0]) != n) continue;
      const double t = std::stod(rows[r][1]), x = std::stod(rows[r][2]), v = std::stod(rows[r][3]);
      CHECK(v == psi_sum(tb, spec, t, x));  // %.17g round-trips
      if (t < 1.0 - spec.radius()) CHECK(v == 0.0);
      peak = std::max(peak, v);
    }
    CHECK(peak == rel(1.0).epsilon(1e-6));
  }
  CHECK(text == run_text("psi", R"({"n_t": 16, "n_x": 41})"));
}

TEST_CASE("simulate is reproducible and thread-invariant") {
  const std::string cfg = R"({"T": 0.25, "dt": 0.0078125, "L": 2, "dx": 0.03125, "paths": 6, "points": [0, 0.5],
                             "times": [0.125, 0.25]})";
  const std::string one = run_text("simulate", cfg, 4, 1);
  CHECK(one == run_text("simulate", cfg, 4, 3));
  CHECK(one != run_text("simulate", cfg, 5, 1));
  CHECK(csv_rows(one).size() == 1 + 6 * 2 * 2);

  // Zero noise coefficient: every path is J0.
  const auto det = csv_rows(run_text("simulate", R"({"T": 0.25, "dt": 0.0078125, "L": 2, "dx": 0.03125, "paths": 2,
                                                     "rho": {"kind": "constant", "value": 0}})"));
  CHECK(std::stod(det[1][3]) == rel(gaussian_kernel(0.25, 0.0)).epsilon(1e-9));
  CHECK(det[1][3] == det[2][3]);

  const std::string bin = run_text("simulate", R"({"T": 0.25, "dt": 0.0078125, "L": 2, "dx": 0.03125, "paths": 3,
                                                   "format": "binary"})", 4);
  REQUIRE(bin.size() == 8 + 4 + 4 + 8 + 8 + 16 + 8 + 16 + 3 * 8);
  CHECK(bin.substr(0, 8) == "FSPDOBS1");

  const auto mall = csv_rows(run_text("simulate", R"({"T": 0.25, "dt": 0.0078125, "L": 2, "dx": 0.03125, "paths": 2,
                                                      "malliavin": {"cells": [[0.125, 0]]}})"));
  CHECK(mall[0][6] == "Du");
  CHECK(std::stod(mall[1][6]) != 0.0);
  const auto win = csv_rows(run_text("simulate", R"({"T": 0.25, "dt": 0.0078125, "L": 2, "dx": 0.03125, "paths": 2,
       "points": [0, 0.5], "malliavin": {"window": {"r_lo": 0.125, "r_hi": 0.25, "z_lo": -0.5, "z_hi": 1}}})"));
  CHECK(win[0][2] == "det");
  CHECK(std::stod(win[1][2]) > 0.0);
}

TEST_CASE("statistics subcommands") {
  const std::string base = R"("T": 0.25, "dt": 0.0078125, "L": 2, "dx": 0.03125, "paths": 200)";
  const auto sb = csv_rows(run_text("smallball", "{" + base + R"(, "observable": {"kind": "infimum"}, "eps": [0.5, 0.1]})"));
  CHECK(sb.size() == 3);
  CHECK(std::stod(sb[2][3]) <= std::stod(sb[1][3]));
  const auto d = csv_rows(run_text("density", "{" + base + R"(, "mu": "lebesgue", "grid_points": 64})"));
  CHECK(d.size() == 65);
  const auto t0 = csv_rows(run_text("t0", R"({"mu": {"kind": "zero"}})"));
  CHECK(t0[1][0] == "inf");
}
