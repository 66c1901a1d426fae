#include "run_config.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <set>

namespace fracspde::cli {

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& e : v) s += (s.empty() ? "" : "; ") + e;
  return s;
}

// Reads one JSON object against a fixed key set, collecting errors by path.
class Obj {
 public:
  Obj(const json& in, std::string path, std::vector<std::string>& errs) : in_(in), path_(std::move(path)), errs_(errs) {
    if (!in_.is_object()) fail("", "expected an object");
  }

  json& out() { return out_; }
  const json* raw(const std::string& key) {
    seen_.insert(key);
    if (!in_.is_object()) return nullptr;
    auto it = in_.find(key);
    return it == in_.end() || it->is_null() ? nullptr : &*it;
  }
  bool has(const std::string& key) const { return in_.is_object() && in_.contains(key) && !in_.at(key).is_null(); }

  double num(const std::string& key, double def, const std::function<bool(double)>& ok = {}, const char* rule = "") {
    double v = def;
    if (const json* j = raw(key)) {
      if (!j->is_number()) return fail(key, "expected a number"), out_[key] = def, def;
      v = j->get<double>();
    }
    if (!std::isfinite(v) || (ok && !ok(v))) fail(key, std::string("must be ") + rule);
    out_[key] = v;
    return v;
  }
  double positive(const std::string& key, double def) {
    return num(key, def, [](double v) { return v > 0.0; }, "positive");
  }
  std::int64_t integer(const std::string& key, std::int64_t def, std::int64_t lo, std::int64_t hi) {
    std::int64_t v = def;
    if (const json* j = raw(key)) {
      if (!j->is_number_integer()) return fail(key, "expected an integer"), out_[key] = def, def;
      v = j->get<std::int64_t>();
    }
    if (v < lo || v > hi) fail(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    out_[key] = v;
    return v;
  }
  bool boolean(const std::string& key, bool def) {
    bool v = def;
    if (const json* j = raw(key)) {
      if (!j->is_boolean()) fail(key, "expected true or false");
      else v = j->get<bool>();
    }
    out_[key] = v;
    return v;
  }
  std::string str(const std::string& key, std::string def, std::vector<std::string> choices = {}) {
    std::string v = std::move(def);
    if (const json* j = raw(key)) {
      if (!j->is_string()) fail(key, "expected a string");
      else v = j->get<std::string>();
    }
    if (!choices.empty() && std::find(choices.begin(), choices.end(), v) == choices.end()) {
      std::string list;
      for (const auto& c : choices) list += (list.empty() ? "" : "|") + c;
      fail(key, "must be one of " + list);
    }
    out_[key] = v;
    return v;
  }
  std::vector<double> nums(const std::string& key, std::vector<double> def, bool nonempty = true) {
    std::vector<double> v = std::move(def);
    if (const json* j = raw(key)) {
      if (j->is_number()) {
        v = {j->get<double>()};
      } else if (!j->is_array() || !std::all_of(j->begin(), j->end(), [](const json& e) { return e.is_number(); })) {
        fail(key, "expected a number or an array of numbers");
      } else {
        v = j->get<std::vector<double>>();
      }
    }
    if (nonempty && v.empty()) fail(key, "must not be empty");
    for (double e : v)
      if (!std::isfinite(e)) fail(key, "entries must be finite");
    out_[key] = v;
    return v;
  }
  void fail(const std::string& key, const std::string& msg) {
    errs_.push_back(path_ + (key.empty() ? "" : "/" + key) + ": " + msg);
  }
  std::string path(const std::string& key) const { return path_ + "/" + key; }
  std::vector<std::string>& errors() { return errs_; }

  json finish() {
    if (in_.is_object())
      for (auto it = in_.begin(); it != in_.end(); ++it)
        if (!seen_.count(it.key())) fail(it.key(), "unknown key");
    return out_;
  }

 private:
  const json& in_;
  std::string path_;
  std::vector<std::string>& errs_;
  std::set<std::string> seen_;
  json out_ = json::object();
};

void model_keys(Obj& o) {
  const double alpha = o.num("alpha", 2.0, [](double a) { return a > 1.0 && a <= 2.0; }, "in (1,2]");
  const double delta = o.num("delta", 0.0);
  if (alpha > 1.0 && alpha <= 2.0 && std::abs(delta) > 2.0 - alpha + 1e-15)
    o.fail("delta", "|delta| must not exceed 2 - alpha");
}

void grid_keys(Obj& o) {
  o.positive("T", 1.0);
  o.positive("dt", 1.0 / 256);
  o.positive("dx", 1.0 / 64);
  o.positive("L", 8.0);
}

json rho_schema(const json* in, const std::string& path, std::vector<std::string>& errs) {
  const json def = {{"kind", "pam"}};
  Obj o(in ? *in : def, path, errs);
  const std::string kind = o.str("kind", "pam", {"pam", "constant", "sine", "abs_sine", "custom"});
  if (kind == "pam") o.num("lambda", 1.0);
  if (kind == "constant") o.num("value", 1.0);
  if (kind == "sine" || kind == "abs_sine") o.num("a", 1.0);
  if (kind == "custom") {
    const json* t = o.raw("table");
    if (!t) {
      o.fail("table", "custom rho needs table {z, values}");
    } else {
      Obj tab(*t, o.path("table"), errs);
      const auto z = tab.nums("z", {});
      const auto v = tab.nums("values", {});
      if (z.size() != v.size() || z.size() < 2) tab.fail("", "z and values need equal length >= 2");
      if (!std::is_sorted(z.begin(), z.end()) || std::adjacent_find(z.begin(), z.end()) != z.end())
        tab.fail("z", "must be strictly increasing");
      o.out()["table"] = tab.finish();
    }
  }
  return o.finish();
}

json mu_schema(const json* in, const std::string& path, std::vector<std::string>& errs, int depth = 0) {
  const json def = {{"kind", "dirac"}};
  json shorthand;
  if (in && in->is_string()) shorthand = {{"kind", *in}}, in = &shorthand;
  Obj o(in ? *in : def, path, errs);
  const std::string kind = o.str("kind", "dirac", {"zero", "dirac", "atoms", "lebesgue", "indicator", "sum"});
  if (kind == "dirac") {
    o.num("location", 0.0);
    o.num("mass", 1.0);
  } else if (kind == "atoms") {
    const json* a = o.raw("atoms");
    std::vector<std::vector<double>> atoms;
    if (!a || !a->is_array()) {
      o.fail("atoms", "expected [[x, mass], ...]");
    } else {
      for (const auto& e : *a) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
          o.fail("atoms", "expected [[x, mass], ...]");
          break;
        }
        atoms.push_back(e.get<std::vector<double>>());
      }
    }
    o.out()["atoms"] = atoms;
  } else if (kind == "lebesgue") {
    o.num("level", 1.0);
  } else if (kind == "indicator") {
    const double a = o.num("a", -1.0);
    const double b = o.num("b", 1.0);
    o.num("level", 1.0);
    if (!(a < b)) o.fail("b", "must exceed a");
  } else if (kind == "sum") {
    const json* terms = o.raw("terms");
    json out = json::array();
    if (!terms || !terms->is_array() || terms->empty() || depth > 4) {
      o.fail("terms", "expected a nonempty array of measures");
    } else {
      for (std::size_t i = 0; i < terms->size(); ++i)
        out.push_back(mu_schema(&(*terms)[i], o.path("terms") + "/" + std::to_string(i), errs, depth + 1));
    }
    o.out()["terms"] = out;
  }
  return o.finish();
}

json window_schema(const json* in, const std::string& path, std::vector<std::string>& errs) {
  const json empty = json::object();
  Obj o(in ? *in : empty, path, errs);
  const MalliavinWindow d;
  const double r_lo = o.num("r_lo", d.r_lo);
  const double r_hi = o.num("r_hi", d.r_hi);
  const double z_lo = o.num("z_lo", d.z_lo);
  const double z_hi = o.num("z_hi", d.z_hi);
  o.integer("stride_t", static_cast<std::int64_t>(d.stride_t), 1, 1 << 20);
  o.integer("stride_x", static_cast<std::int64_t>(d.stride_x), 1, 1 << 20);
  if (!(r_lo < r_hi)) o.fail("r_hi", "must exceed r_lo");
  if (!(z_lo < z_hi)) o.fail("z_hi", "must exceed z_lo");
  return o.finish();
}

json observable_schema(const json* in, const std::string& path, double T, std::vector<std::string>& errs) {
  const json empty = json::object();
  Obj o(in ? *in : empty, path, errs);
  const std::string kind = o.str("kind", "point_values", {"point_values", "infimum", "increments", "det_sigma"});
  o.positive("t", T);
  if (kind == "point_values" || kind == "det_sigma") o.nums("points", {0.0});
  if (kind == "infimum") {
    const double lo = o.num("k_lo", -0.5);
    const double hi = o.num("k_hi", 0.5);
    if (!(lo <= hi)) o.fail("k_hi", "must not be below k_lo");
  }
  if (kind == "increments") {
    o.nums("points", {0.0});
    for (double h : o.nums("lags", {1.0 / 512, 1.0 / 256, 1.0 / 128, 1.0 / 64, 1.0 / 32}))
      if (!(h > 0)) o.fail("lags", "must be positive");
    if (o.out()["points"].size() != 1) o.fail("points", "increments take exactly one point");
  }
  if (kind == "det_sigma") o.out()["window"] = window_schema(o.raw("window"), o.path("window"), errs);
  return o.finish();
}

void sim_keys(Obj& o, std::vector<std::string>& errs) {
  model_keys(o);
  grid_keys(o);
  o.out()["rho"] = rho_schema(o.raw("rho"), o.path("rho"), errs);
  o.out()["mu"] = mu_schema(o.raw("mu"), o.path("mu"), errs);
  o.integer("paths", 100, 1, 100000000);
  o.boolean("positivity_clip", false);
  if (const json* d = o.raw("drift")) {
    Obj dr(*d, o.path("drift"), errs);
    dr.integer("n", 4, 1, 40);
    const auto pts = dr.nums("points", {0.0});
    const auto z = dr.nums("z", {0.0});
    if (pts.size() != z.size()) dr.fail("z", "needs one entry per point");
    o.out()["drift"] = dr.finish();
  } else {
    o.out()["drift"] = nullptr;
  }
}

json schema_for(const std::string& sub, const json& in, std::uint64_t& seed, std::vector<std::string>& errs) {
  Obj o(in, "", errs);
  auto seed_key = [&] { seed = static_cast<std::uint64_t>(o.integer("seed", static_cast<std::int64_t>(seed), 0, INT64_MAX)); };
  if (sub == "kernel") {
    model_keys(o);
    for (double t : o.nums("t", {0.1, 0.5, 1.0}))
      if (!(t > 0)) o.fail("t", "must be positive");
    const double lo = o.num("x_min", -5.0);
    const double hi = o.num("x_max", 5.0);
    if (!(lo < hi)) o.fail("x_max", "must exceed x_min");
    o.integer("n_x", 201, 2, 1000000);
    o.str("cache", "");
  } else if (sub == "mittag") {
    o.num("a", 1.0, [](double a) { return a > 0; }, "positive");
    o.num("b", 1.0, [](double b) { return b > 0; }, "positive");
    o.nums("z", {1.0});
  } else if (sub == "gronwall") {
    o.num("alpha", 2.0, [](double a) { return a > 1.0 && a <= 2.0; }, "in (1,2]");
    o.num("lambda", 1.0, [](double l) { return l >= 0; }, "nonnegative");
    o.num("beta", 1.0);
    const double T = o.positive("T", 1.0);
    o.positive("dt", 1.0 / 256);
    if (o.has("epsilon")) {
      const double e = o.positive("epsilon", 0.5);
      if (e > T) o.fail("epsilon", "must not exceed T");
    } else {
      o.raw("epsilon");
      o.out()["epsilon"] = nullptr;
    }
  } else if (sub == "moments") {
    model_keys(o);
    grid_keys(o);
    o.num("lambda", 1.0, [](double l) { return l >= 0; }, "nonnegative");
    o.integer("n_terms", 12, 1, 200);
    o.nums("points", {0.0});
  } else if (sub == "simulate") {
    sim_keys(o, errs);
    seed_key();
    const double T = o.out()["T"];
    o.nums("points", {0.0});
    for (double t : o.nums("times", {T}))
      if (!(t > 0 && t <= T + 1e-12)) o.fail("times", "must lie in (0, T]");
    o.str("format", "csv", {"csv", "binary"});
    if (const json* m = o.raw("malliavin")) {
      Obj mo(*m, o.path("malliavin"), errs);
      if (mo.has("cells") == mo.has("window")) mo.fail("", "give exactly one of cells or window");
      if (const json* c = mo.raw("cells")) {
        std::vector<std::vector<double>> cells;
        if (!c->is_array()) mo.fail("cells", "expected [[r, z], ...]");
        else
          for (const auto& e : *c) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
              mo.fail("cells", "expected [[r, z], ...]");
              break;
            }
            cells.push_back(e.get<std::vector<double>>());
          }
        mo.out()["cells"] = cells;
      }
      if (mo.has("window")) mo.out()["window"] = window_schema(mo.raw("window"), mo.path("window"), errs);
      o.out()["malliavin"] = mo.finish();
    } else {
      o.out()["malliavin"] = nullptr;
    }
  } else if (sub == "psi") {
    model_keys(o);
    for (double n : o.nums("n", {1, 2, 3}))
      if (n < 1 || n > 40 || n != std::floor(n)) o.fail("n", "entries must be integers in [1, 40]");
    const double T = o.positive("T", 1.0);
    const double t_min = o.num("t_min", 0.0);
    if (!(t_min >= 0 && t_min < T)) o.fail("t_min", "must lie in [0, T)");
    o.nums("points", {0.0});
    o.integer("n_t", 65, 2, 100000);
    o.integer("n_x", 161, 2, 100000);
    const double lo = o.num("x_min", -2.0);
    const double hi = o.num("x_max", 2.0);
    if (!(lo < hi)) o.fail("x_max", "must exceed x_min");
  } else if (sub == "density" || sub == "smallball" || sub == "holder") {
    sim_keys(o, errs);
    seed_key();
    const double T = o.out()["T"];
    if (sub == "holder") {
      o.positive("t", 0.5);
      o.num("x", 0.0);
      const auto lags = o.nums("lags", {1.0 / 512, 1.0 / 256, 1.0 / 128, 1.0 / 64, 1.0 / 32});
      if (lags.size() < 3) o.fail("lags", "need at least 3 lags");
    } else {
      o.out()["observable"] = observable_schema(o.raw("observable"), o.path("observable"), T, errs);
    }
    if (sub == "density") o.integer("grid_points", 0, 0, 100000);
    if (sub == "smallball") o.nums("eps", {1e-1, 3e-2, 1e-2, 3e-3, 1e-3});
    o.str("summary", "");
  } else if (sub == "t0") {
    model_keys(o);
    o.out()["rho"] = rho_schema(o.raw("rho"), o.path("rho"), errs);
    o.out()["mu"] = mu_schema(o.raw("mu"), o.path("mu"), errs);
    const double s_min = o.positive("s_min", 0.01);
    const double s_max = o.positive("s_max", 1.0);
    if (!(s_min < s_max)) o.fail("s_max", "must exceed s_min");
    o.integer("n_s", 100, 2, 1000000);
    const double y_min = o.num("y_min", -2.0);
    const double y_max = o.num("y_max", 2.0);
    if (!(y_min < y_max)) o.fail("y_max", "must exceed y_min");
    o.integer("n_y", 41, 2, 1000000);
    o.num("zero_tol", 1e-12, [](double v) { return v >= 0; }, "nonnegative");
  }
  return o.finish();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors) : std::runtime_error(join(errors)), errors_(std::move(errors)) {}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s = {"kernel", "mittag",  "gronwall",  "moments", "simulate",
                                             "psi",    "density", "smallball", "t0",      "holder"};
  return s;
}

RunConfig parse_config(const std::string& subcommand, const std::string& text, std::optional<std::uint64_t> seed) {
  const auto& subs = subcommands();
  if (std::find(subs.begin(), subs.end(), subcommand) == subs.end())
    throw ConfigError({"unknown subcommand '" + subcommand + "'"});
  json in = json::object();
  if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
    try {
      in = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError({std::string("syntax: ") + e.what()});
    }
  }
  std::vector<std::string> errs;
  RunConfig rc;
  rc.subcommand = subcommand;
  std::uint64_t s = 1;
  rc.params = schema_for(subcommand, in, s, errs);
  if (!errs.empty()) throw ConfigError(std::move(errs));
  rc.master_seed = seed.value_or(s);
  if (rc.params.contains("seed")) rc.params["seed"] = rc.master_seed;
  const json canon = {{"subcommand", subcommand}, {"params", rc.params}, {"seed", rc.master_seed}};
  rc.digest = config_digest(canon.dump());
  return rc;
}

int resolve_threads(std::optional<int> flag) {
  if (flag) {
    if (*flag < 1) throw ConfigError({"--threads must be positive"});
    return *flag;
  }
  if (const char* env = std::getenv("FRACSPDE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1 || v > 4096)
      throw ConfigError({"FRACSPDE_THREADS must be a positive integer"});
    return static_cast<int>(v);
  }
  return 1;
}

StableParams stable_params(const json& p) { return {p.value("alpha", 2.0), p.value("delta", 0.0)}; }

DiffusionCoefficient make_rho(const json& rho) {
  const std::string kind = rho.at("kind");
  if (kind == "pam") return DiffusionCoefficient::pam(rho.at("lambda"));
  if (kind == "constant") return DiffusionCoefficient::constant(rho.at("value"));
  if (kind == "sine") return DiffusionCoefficient::sine(rho.at("a"));
  if (kind == "abs_sine") return DiffusionCoefficient::abs_sine(rho.at("a"));
  // Piecewise linear in z, flat outside the table.
  const auto z = rho.at("table").at("z").get<std::vector<double>>();
  const auto v = rho.at("table").at("values").get<std::vector<double>>();
  double lip = 0.0, vmax = 0.0;
  for (std::size_t i = 0; i + 1 < z.size(); ++i) lip = std::max(lip, std::abs((v[i + 1] - v[i]) / (z[i + 1] - z[i])));
  for (double e : v) vmax = std::max(vmax, std::abs(e));
  if (lip == 0.0) return DiffusionCoefficient::constant(v.front());
  auto seg = [z](double x) {
    const auto it = std::upper_bound(z.begin(), z.end(), x);
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - z.begin() - 1, 0, static_cast<std::ptrdiff_t>(z.size()) - 2));
  };
  auto f = [z, v, seg](double, double, double x) {
    if (x <= z.front()) return v.front();
    if (x >= z.back()) return v.back();
    const std::size_t i = seg(x);
    return v[i] + (v[i + 1] - v[i]) * (x - z[i]) / (z[i + 1] - z[i]);
  };
  auto df = [z, v, seg](double, double, double x) {
    if (x < z.front() || x > z.back()) return 0.0;
    const std::size_t i = seg(x);
    return (v[i + 1] - v[i]) / (z[i + 1] - z[i]);
  };
  return DiffusionCoefficient::custom(f, df, lip, vmax / lip);
}

InitialMeasure make_mu(const json& mu) {
  const std::string kind = mu.at("kind");
  if (kind == "zero") return InitialMeasure::zero();
  if (kind == "dirac") return InitialMeasure::dirac(mu.at("location"), mu.at("mass"));
  if (kind == "lebesgue") return InitialMeasure::lebesgue(mu.at("level"));
  if (kind == "indicator") return InitialMeasure::indicator(mu.at("a"), mu.at("b"), mu.at("level"));
  if (kind == "atoms") {
    std::vector<DiracAtom> atoms;
    for (const auto& a : mu.at("atoms")) atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    return InitialMeasure::atoms(std::move(atoms));
  }
  InitialMeasure sum;
  for (const auto& t : mu.at("terms")) sum = sum + make_mu(t);
  return sum;
}

ObservableSpec make_observable(const json& obs) {
  ObservableSpec s;
  const std::string kind = obs.at("kind");
  s.kind = kind == "infimum"      ? ObservableKind::infimum
           : kind == "increments" ? ObservableKind::increments
           : kind == "det_sigma"  ? ObservableKind::det_sigma
                                  : ObservableKind::point_values;
  s.t = obs.at("t");
  if (obs.contains("points")) s.points = obs.at("points").get<std::vector<double>>();
  if (obs.contains("k_lo")) s.k_lo = obs.at("k_lo"), s.k_hi = obs.at("k_hi");
  if (obs.contains("lags")) s.lags = obs.at("lags").get<std::vector<double>>();
  if (obs.contains("window")) {
    const auto& w = obs.at("window");
    s.window.t = s.t;
    s.window.r_lo = w.at("r_lo");
    s.window.r_hi = w.at("r_hi");
    s.window.z_lo = w.at("z_lo");
    s.window.z_hi = w.at("z_hi");
    s.window.stride_t = w.at("stride_t");
    s.window.stride_x = w.at("stride_x");
  }
  return s;
}

}  // namespace fracspde::cli
