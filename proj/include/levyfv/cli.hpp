#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "levyfv/lawcheck.hpp"
#include "levyfv/passage_mc.hpp"
#include "levyfv/processes.hpp"
#include "levyfv/renewal.hpp"
#include "levyfv/report.hpp"
#include "levyfv/rw_ladder.hpp"
#include "levyfv/transforms.hpp"

namespace levyfv::cli {

using json = nlohmann::json;

// Error in the configuration; path names the offending key, e.g. "checks[2].t".
struct ConfigError : std::runtime_error {
  std::string path;
  ConfigError(std::string p, const std::string& msg) : std::runtime_error(p + ": " + msg), path(std::move(p)) {}
};

using Fixture = std::variant<ProcessSpec, BivariateSubordinatorSpec>;

inline bool is_levy(const Fixture& f) { return std::holds_alternative<ProcessSpec>(f); }

inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> n{"p-estimate", "V-grid",      "ct1",        "subpint",
                                          "quintuple",  "quadruple",   "amicale",    "slfi",
                                          "slfi-fluct", "wiener-hopf", "resolvent",  "alpha"};
  return n;
}

struct CheckSpec {
  std::string check;
  std::string fixture;
  json params;  // the check object as written, used for hashing and parameters
  std::string path;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::uint64_t chunk_size = 4096;
  std::uint64_t N = 100000;
  std::string output = "results";
  std::map<std::string, Fixture> fixtures;
  std::vector<CheckSpec> checks;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline void allow_keys(const json& j, const std::string& path, const std::set<std::string>& keys) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key())) throw ConfigError(path + "." + it.key(), "unknown key");
}

inline double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path, "must be finite");
  return x;
}

inline std::uint64_t count(const json& j, const std::string& path) {
  if (!j.is_number_integer() && !(j.is_number() && j.get<double>() == std::floor(j.get<double>())))
    throw ConfigError(path, "expected an integer");
  const double x = j.get<double>();
  if (!(x >= 1.0)) throw ConfigError(path, "must be at least 1");
  return static_cast<std::uint64_t>(x);
}

inline Rational prob(const json& j, const std::string& path) {
  try {
    if (j.is_string()) return parse_rational(j.get<std::string>());
    if (j.is_number_integer()) return Rational(j.get<long>());
    if (j.is_number()) return parse_rational(j.dump());
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(path, "expected a probability (number or \"a/b\" string)");
}

inline JumpLaw parse_jumps(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError(path + ".type", "missing jump law type");
  const std::string type = j.at("type").get<std::string>();
  try {
    if (type == "discrete") {
      allow_keys(j, path, {"type", "atoms"});
      if (!j.contains("atoms") || !j.at("atoms").is_array()) throw ConfigError(path + ".atoms", "expected an array");
      std::vector<std::pair<double, Rational>> atoms;
      for (std::size_t i = 0; i < j.at("atoms").size(); ++i) {
        const auto& a = j.at("atoms")[i];
        const std::string p = path + ".atoms[" + std::to_string(i) + "]";
        if (!a.is_array() || a.size() != 2) throw ConfigError(p, "expected [value, probability]");
        atoms.emplace_back(num(a[0], p + "[0]"), prob(a[1], p + "[1]"));
      }
      return discrete_law(atoms);
    }
    if (type == "exponential") {
      allow_keys(j, path, {"type", "rate", "sign"});
      const double rate = num(j.at("rate"), path + ".rate");
      const int sign = j.contains("sign") ? static_cast<int>(num(j.at("sign"), path + ".sign")) : 1;
      return JumpLaw(ExponentialJumps{rate, sign});
    }
    if (type == "uniform") {
      allow_keys(j, path, {"type", "lo", "hi"});
      return JumpLaw(UniformJumps{num(j.at("lo"), path + ".lo"), num(j.at("hi"), path + ".hi")});
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(path + ".type", "unknown jump law '" + type + "'");
}

inline Fixture builtin_fixture(const std::string& name, const std::string& path) {
  if (name == "P1") return fixtures::P1();
  if (name == "P2") return fixtures::P2();
  if (name == "P3") return fixtures::P3();
  if (name == "B1") return fixtures::B1();
  throw ConfigError(path, "unknown builtin fixture '" + name + "'");
}

inline Fixture parse_fixture(const json& j, const std::string& path) {
  if (!j.contains("kind")) throw ConfigError(path + ".kind", "missing fixture kind");
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "levy") {
      allow_keys(j, path, {"name", "kind", "drift", "rate", "jumps"});
      ProcessSpec s;
      s.c = num(j.at("drift"), path + ".drift");
      s.lambda = num(j.at("rate"), path + ".rate");
      if (!j.contains("jumps")) throw ConfigError(path + ".jumps", "missing jump law");
      s.jumps = parse_jumps(j.at("jumps"), path + ".jumps");
      s.validate();
      return s;
    }
    if (kind == "subordinator") {
      allow_keys(j, path, {"name", "kind", "dZ", "dY", "q", "atoms"});
      BivariateSubordinatorSpec b;
      b.dZ = num(j.at("dZ"), path + ".dZ");
      b.dY = num(j.at("dY"), path + ".dY");
      b.q = j.contains("q") ? num(j.at("q"), path + ".q") : 0.0;
      if (j.contains("atoms")) {
        for (std::size_t i = 0; i < j.at("atoms").size(); ++i) {
          const auto& a = j.at("atoms")[i];
          const std::string p = path + ".atoms[" + std::to_string(i) + "]";
          if (!a.is_array() || a.size() != 3) throw ConfigError(p, "expected [dt, dx, rate]");
          b.atoms.push_back({num(a[0], p + "[0]"), num(a[1], p + "[1]"), num(a[2], p + "[2]")});
        }
      }
      b.validate();
      return b;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(path + ".kind", "unknown fixture kind '" + kind + "'");
}

inline std::vector<double> num_list(const json& j, const std::string& path) {
  std::vector<double> v;
  if (j.is_number()) return {num(j, path)};
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a number or a nonempty array");
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(num(j[i], path + "[" + std::to_string(i) + "]"));
  return v;
}

}  // namespace detail

// Allowed keys per check, beyond "check", "fixture" and "N".
inline const std::map<std::string, std::set<std::string>>& check_keys() {
  static const std::map<std::string, std::set<std::string>> k{
      {"p-estimate", {"t", "u"}},
      {"V-grid", {"t", "u", "ladder_cap"}},
      {"ct1", {"t", "u", "delta"}},
      {"subpint", {"t", "u", "nodes_per_piece"}},
      {"quintuple", {"u", "t_edges", "s_edges", "x_edges", "h_edges", "y_edges", "delta"}},
      {"quadruple", {"u", "y_edges", "t_edges", "delta"}},
      {"amicale", {"s_edges", "x_edges", "ladder_cap"}},
      {"slfi", {"mu", "rho", "ell", "nu", "theta", "branch", "nodes"}},
      {"slfi-fluct", {"mu", "rho", "ell", "nu", "theta", "branch", "nodes", "N_rhs", "passage_cap", "ladder_cap"}},
      {"wiener-hopf", {"a"}},
      {"resolvent", {"q", "u", "delta"}},
      {"alpha", {"v_max", "x_max", "s_edges"}},
  };
  return k;
}

inline ExperimentConfig parse_config(const json& j) {
  detail::allow_keys(j, "config", {"seed", "chunk_size", "N", "output", "fixtures", "checks"});
  ExperimentConfig c;
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer() || j.at("seed").get<long long>() < 0)
      throw ConfigError("config.seed", "expected a nonnegative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("chunk_size")) c.chunk_size = detail::count(j.at("chunk_size"), "config.chunk_size");
  if (j.contains("N")) c.N = detail::count(j.at("N"), "config.N");
  if (j.contains("output")) {
    if (!j.at("output").is_string()) throw ConfigError("config.output", "expected a string");
    c.output = j.at("output").get<std::string>();
  }
  if (!j.contains("fixtures") || !j.at("fixtures").is_array())
    throw ConfigError("config.fixtures", "expected an array of fixture references");
  const auto& fx = j.at("fixtures");
  for (std::size_t i = 0; i < fx.size(); ++i) {
    const std::string p = "fixtures[" + std::to_string(i) + "]";
    if (fx[i].is_string()) {
      const auto name = fx[i].get<std::string>();
      c.fixtures[name] = detail::builtin_fixture(name, p);
    } else if (fx[i].is_object()) {
      if (!fx[i].contains("name") || !fx[i].at("name").is_string()) throw ConfigError(p + ".name", "missing name");
      const auto name = fx[i].at("name").get<std::string>();
      if (c.fixtures.count(name)) throw ConfigError(p + ".name", "duplicate fixture '" + name + "'");
      c.fixtures[name] = detail::parse_fixture(fx[i], p);
    } else {
      throw ConfigError(p, "expected a builtin name or a fixture object");
    }
  }
  if (!j.contains("checks") || !j.at("checks").is_array()) throw ConfigError("config.checks", "expected an array");
  const auto& ck = j.at("checks");
  for (std::size_t i = 0; i < ck.size(); ++i) {
    const std::string p = "checks[" + std::to_string(i) + "]";
    const auto& o = ck[i];
    if (!o.is_object()) throw ConfigError(p, "expected an object");
    if (!o.contains("check") || !o.at("check").is_string()) throw ConfigError(p + ".check", "missing check name");
    const auto name = o.at("check").get<std::string>();
    const auto it = check_keys().find(name);
    if (it == check_keys().end()) throw ConfigError(p + ".check", "unknown check '" + name + "'");
    auto keys = it->second;
    keys.insert({"check", "fixture", "N"});
    detail::allow_keys(o, p, keys);
    if (!o.contains("fixture") || !o.at("fixture").is_string()) throw ConfigError(p + ".fixture", "missing fixture");
    const auto fixture = o.at("fixture").get<std::string>();
    if (!c.fixtures.count(fixture)) throw ConfigError(p + ".fixture", "fixture '" + fixture + "' is not declared");
    if (o.contains("N")) detail::count(o.at("N"), p + ".N");
    c.checks.push_back({name, fixture, o, p});
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Per-check parameters with defaults

namespace detail {

struct Params {
  const CheckSpec& cs;
  double get(const char* key, double def) const {
    return cs.params.contains(key) ? num(cs.params.at(key), cs.path + "." + key) : def;
  }
  double need(const char* key) const {
    if (!cs.params.contains(key)) throw ConfigError(cs.path + "." + key, "required");
    return num(cs.params.at(key), cs.path + "." + key);
  }
  std::vector<double> list(const char* key, std::vector<double> def) const {
    return cs.params.contains(key) ? num_list(cs.params.at(key), cs.path + "." + key) : def;
  }
  std::uint64_t n(std::uint64_t def) const {
    return cs.params.contains("N") ? count(cs.params.at("N"), cs.path + ".N") : def;
  }
  std::string str(const char* key, const std::string& def) const {
    if (!cs.params.contains(key)) return def;
    if (!cs.params.at(key).is_string()) throw ConfigError(cs.path + "." + key, "expected a string");
    return cs.params.at(key).get<std::string>();
  }
  Axis axis(const char* key, std::vector<double> def) const {
    auto e = list(key, std::move(def));
    try {
      return Axis(e);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(cs.path + "." + key, ex.what());
    }
  }
  TransformParams transform() const {
    return {get("mu", 1.0), get("rho", 2.0), get("ell", 0.0), get("nu", 1.0), get("theta", 1.0)};
  }
  SlfiBranch branch() const {
    const auto b = str("branch", "auto");
    if (b == "auto") return SlfiBranch::automatic;
    if (b == "generic") return SlfiBranch::generic;
    if (b == "derivative") return SlfiBranch::derivative;
    throw ConfigError(cs.path + ".branch", "expected auto, generic or derivative");
  }
};

inline bool lattice_cp(const ProcessSpec& s) { return s.compound_poisson() && s.jumps.is_discrete(); }

}  // namespace detail

inline const std::vector<double>& default_time_edges() {
  static const std::vector<double> e{0, 1, 3, 10, 30, 100, 1000, 50000};
  return e;
}

// Throws ConfigError when a check cannot run on its fixture or its parameters are inadmissible.
inline void validate_check(const CheckSpec& cs, const Fixture& fx) {
  const detail::Params P{cs};
  auto need_levy = [&]() -> const ProcessSpec& {
    if (!is_levy(fx)) throw ConfigError(cs.path + ".fixture", cs.check + " needs a levy fixture");
    return std::get<ProcessSpec>(fx);
  };
  auto need_sub = [&]() -> const BivariateSubordinatorSpec& {
    if (is_levy(fx)) throw ConfigError(cs.path + ".fixture", cs.check + " needs a subordinator fixture");
    return std::get<BivariateSubordinatorSpec>(fx);
  };
  auto positive = [&](const char* key, double v) {
    if (!(v > 0.0)) throw ConfigError(cs.path + "." + key, "must be positive");
  };
  const auto& c = cs.check;
  if (c == "p-estimate") {
    need_levy();
    for (double t : P.list("t", {})) positive("t", t);
    for (double u : P.list("u", {})) positive("u", u);
    if (!cs.params.contains("t") || !cs.params.contains("u")) throw ConfigError(cs.path, "p-estimate needs t and u");
  } else if (c == "V-grid") {
    for (double t : P.list("t", {0.5, 1, 2})) positive("t", t);
    for (double u : P.list("u", {0.5, 1, 2, 3})) positive("u", u);
    if (is_levy(fx) && std::get<ProcessSpec>(fx).c < 0.0)
      throw ConfigError(cs.path + ".fixture", "V-grid needs c >= 0");
    if (!is_levy(fx) && std::get<BivariateSubordinatorSpec>(fx).q <= 0.0 && std::get<BivariateSubordinatorSpec>(fx).dZ <= 0.0)
      throw ConfigError(cs.path + ".fixture", "V-grid needs killing or a positive Z-drift");
  } else if (c == "ct1") {
    need_levy();
    const double u = P.need("u"), d = P.get("delta", 0.005);
    positive("t", P.need("t"));
    positive("delta", d);
    if (!(u - 2 * d > 0.0)) throw ConfigError(cs.path + ".u", "u must exceed 2 delta");
  } else if (c == "subpint") {
    positive("t", P.need("t"));
    positive("u", P.need("u"));
  } else if (c == "quintuple") {
    const auto& s = need_levy();
    positive("u", P.need("u"));
    if (detail::lattice_cp(s)) {
      try {
        levyfv::detail::lattice_units(P.need("u"), LatticeWalkSpec::from_process(s).h, "u");
      } catch (const std::invalid_argument& e) {
        throw ConfigError(cs.path + ".u", e.what());
      }
    } else if (!(s.c > 0.0 && s.jumps.is_discrete())) {
      throw ConfigError(cs.path + ".fixture", "quintuple needs a lattice compound Poisson or a drift with discrete jumps");
    }
  } else if (c == "quadruple") {
    const auto& b = need_sub();
    const double u = P.need("u");
    positive("u", u);
    const auto y = P.axis("y_edges", {});
    for (const auto& a : b.atoms)
      if (a.dx > 0.0 && a.dx < u && std::find(y.edges.begin(), y.edges.end(), a.dx) == y.edges.end())
        throw ConfigError(cs.path + ".y_edges", "must contain every atom dx below u");
  } else if (c == "amicale") {
    if (need_levy().c < 0.0) throw ConfigError(cs.path + ".fixture", "amicale needs c >= 0");
  } else if (c == "slfi") {
    need_sub();
    const auto p = P.transform();
    try {
      validate_branch(p, P.branch());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(cs.path + ".branch", e.what());
    }
    positive("mu", p.mu);
    for (auto [k, v] : {std::pair{"rho", p.rho}, {"ell", p.ell}, {"nu", p.nu}, {"theta", p.theta}})
      if (v < 0.0) throw ConfigError(cs.path + "." + k, "negative transform parameters are not supported");
  } else if (c == "slfi-fluct") {
    if (!(need_levy().c > 0.0)) throw ConfigError(cs.path + ".fixture", "slfi-fluct needs c > 0");
    const auto p = P.transform();
    try {
      validate_branch(p, P.branch());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(cs.path + ".branch", e.what());
    }
    positive("mu", p.mu);
    for (auto [k, v] : {std::pair{"rho", p.rho}, {"ell", p.ell}, {"nu", p.nu}, {"theta", p.theta}})
      if (v < 0.0) throw ConfigError(cs.path + "." + k, "negative transform parameters are not supported");
  } else if (c == "wiener-hopf") {
    if (need_levy().c < 0.0) throw ConfigError(cs.path + ".fixture", "wiener-hopf needs c >= 0");
    for (double a : P.list("a", {0.5, 1, 2})) positive("a", a);
  } else if (c == "resolvent") {
    const auto& s = need_levy();
    if (!(s.c > 0.0) || s.jumps.has_negative_jumps())
      throw ConfigError(cs.path + ".fixture", "resolvent needs a subordinator fixture with c > 0");
    positive("q", P.get("q", 1.0));
    if (!(P.get("u", 0.5) - 2 * P.get("delta", 0.005) > 0.0)) throw ConfigError(cs.path + ".u", "u below the grid spacing");
  } else if (c == "alpha") {
    if (!detail::lattice_cp(need_levy())) throw ConfigError(cs.path + ".fixture", "alpha needs a lattice compound Poisson fixture");
  }
}

// ---------------------------------------------------------------------------
// Dispatch

struct RunOptions {
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string out_dir = "results";
};

struct RunResult {
  std::vector<CheckReport> reports;
  int exit_status = 0;
};

namespace detail {

inline std::string slug(std::string s) {
  for (auto& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
  return s;
}

inline void write_file(const std::filesystem::path& p, const std::function<void(std::ostream&)>& fn) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  fn(os);
}

inline std::vector<CheckReport> run_check(const CheckSpec& cs, const Fixture& fx, std::uint64_t N,
                                          const McContext& ctx, const std::filesystem::path& out,
                                          std::size_t index) {
  const Params P{cs};
  const std::string tag = std::to_string(index) + "_" + slug(cs.check) + "_" + slug(cs.fixture);
  const auto& c = cs.check;
  std::vector<CheckReport> reps;

  if (c == "p-estimate") {
    const auto& s = std::get<ProcessSpec>(fx);
    const auto ts = P.list("t", {}), us = P.list("u", {});
    std::vector<double> sorted_u = us;
    std::sort(sorted_u.begin(), sorted_u.end());
    sorted_u.erase(std::unique(sorted_u.begin(), sorted_u.end()), sorted_u.end());
    CheckReport r;
    r.check = c;
    r.n = N;
    double worst = -kInf;
    std::ostringstream csv;
    CsvWriter w(csv);
    w.header({"t", "u", "p", "SE"});
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const auto est = estimate_p_levels(s, ts[i], sorted_u, N, ctx.sub(i));
      for (std::size_t j = 0; j < sorted_u.size(); ++j) {
        w.row(ts[i], sorted_u[j], est[j].value, est[j].se);
        // no jump before u / c gives p >= exp(-lambda u / c) when u <= c t
        const double lb = s.c > 0.0 && sorted_u[j] <= s.c * ts[i] ? std::exp(-s.lambda * sorted_u[j] / s.c) : 0.0;
        worst = std::max(worst, lb - est[j].value - 3.0 * est[j].se);
        r.lhs += est[j].value;
        r.rhs += lb;
      }
    }
    write_file(out / ("p_" + tag + ".csv"), [&](std::ostream& os) { os << csv.str(); });
    r.distance = std::max(0.0, worst);
    r.budget = 0.0;
    r.pass = worst <= 0.0;
    r.note = "sum of estimates vs sum of no-jump lower bounds";
    reps.push_back(r);
  } else if (c == "V-grid") {
    const auto ts = P.list("t", {0.5, 1, 2}), us = P.list("u", {0.5, 1, 2, 3});
    RenewalGrid a, b;
    std::string route;
    if (is_levy(fx)) {
      const auto& s = std::get<ProcessSpec>(fx);
      a = estimate_V(LadderModel(s, P.get("ladder_cap", 1e4)), ts, us, N, ctx.sub(0));
      if (lattice_cp(s)) {
        const std::size_t K = choose_truncation(s.lambda, ts.back());
        const auto walk = LatticeWalkSpec::from_process(s);
        const auto J = static_cast<std::size_t>(std::ceil(us.back() / walk.h)) + 1;
        b = exact_V_grid(renewal_tables_long(walk, K, J), s.lambda, ts, us, false);
        route = "ladder minimum vs exact";
      } else {
        b = estimate_V_paths(s, ts, us, N, ctx.sub(1));
        route = "ladder minimum vs path occupation";
      }
    } else {
      const AtomModel m(std::get<BivariateSubordinatorSpec>(fx));
      a = estimate_V(m, ts, us, N, ctx.sub(0));
      b = estimate_V_occupation(m, ts, us, N, ctx.sub(1));
      route = "minimum vs occupation";
    }
    write_file(out / ("V_" + tag + ".csv"), [&](std::ostream& os) {
      write_grid_csv(a, os);
    });
    write_file(out / ("V_" + tag + "_" + b.provenance + ".csv"), [&](std::ostream& os) { write_grid_csv(b, os); });
    CheckReport r;
    r.check = c;
    r.n = N;
    double worst = -kInf, dmax = 0.0, bmax = 0.0;
    for (std::size_t k = 0; k < a.V.size(); ++k) {
      const double d = std::fabs(a.V[k].value - b.V[k].value);
      // exact grids carry the truncation bound in the se slot
      const double bud = b.provenance == "exact" ? 3.0 * a.V[k].se + b.V[k].se : 3.0 * combined_se(a.V[k].se, b.V[k].se);
      if (d - bud > worst) {
        worst = d - bud;
        dmax = d;
        bmax = bud;
        r.lhs = a.V[k].value;
        r.rhs = b.V[k].value;
        r.se_lhs = a.V[k].se;
        r.se_rhs = b.V[k].se;
      }
    }
    r.distance = dmax;
    r.budget = bmax;
    r.pass = worst <= 0.0;
    r.note = route + ", worst cell shown";
    reps.push_back(r);
  } else if (c == "ct1") {
    reps.push_back(check_ct1(std::get<ProcessSpec>(fx), P.need("t"), P.need("u"), P.get("delta", 0.005), N, ctx));
  } else if (c == "subpint") {
    SubpintOptions o;
    o.nodes_per_piece = static_cast<int>(P.get("nodes_per_piece", 16));
    if (is_levy(fx))
      reps.push_back(check_subpint(std::get<ProcessSpec>(fx), P.need("t"), P.need("u"), N, ctx, o));
    else
      reps.push_back(check_subpint(std::get<BivariateSubordinatorSpec>(fx), P.need("t"), P.need("u"), N, ctx, o));
  } else if (c == "quintuple") {
    const auto& s = std::get<ProcessSpec>(fx);
    const double u = P.need("u");
    QuintupleOptions o;
    o.delta = P.get("delta", 0.005);
    if (lattice_cp(s)) {
      const auto walk = LatticeWalkSpec::from_process(s);
      const auto m = static_cast<std::size_t>(walk.m());
      const auto nu = static_cast<std::size_t>(std::lround(u / walk.h));
      const std::vector<Axis> axes{Axis::lattice(m, walk.h), Axis::lattice(m, walk.h), Axis::lattice(std::min(nu, m), walk.h),
                                   P.axis("s_edges", default_time_edges()), P.axis("t_edges", default_time_edges())};
      reps.push_back(check_quintuple_lattice(s, u, axes, N, ctx, o));
    } else {
      const std::vector<Axis> axes{P.axis("x_edges", {0, s.jumps.max_abs()}), P.axis("h_edges", {0, 0.3, 0.6, 1}),
                                   P.axis("y_edges", {0, 0.4 * u, 0.7 * u, u}),
                                   P.axis("s_edges", {0, 0.25, 0.5, 1, 2, 50}),
                                   P.axis("t_edges", {0, 0.25, 0.5, 1, 2, 50})};
      for (auto& r : check_quintuple_drift(s, u, axes, N, ctx, o)) reps.push_back(r);
    }
  } else if (c == "quadruple") {
    const double u = P.need("u");
    QuadrupleOptions o;
    o.delta = P.get("delta", 0.005);
    reps.push_back(check_quadruple(std::get<BivariateSubordinatorSpec>(fx), u, P.axis("y_edges", {}),
                                   P.axis("t_edges", {0, 0.25, 0.5, 0.75, 1, 1.5, 2, 3, 5, 1e6}), N, ctx, o));
  } else if (c == "amicale") {
    const auto& s = std::get<ProcessSpec>(fx);
    AmicaleOptions o;
    o.ladder_cap = P.get("ladder_cap", 1e4);
    std::vector<double> xdef;
    if (lattice_cp(s)) {
      const auto walk = LatticeWalkSpec::from_process(s);
      for (long i = 0; i <= walk.m(); ++i) xdef.push_back(i * walk.h);
    } else {
      xdef = {0, 0.25, 0.5, 0.75, 1};
    }
    const auto sax = P.axis("s_edges", {0, 1, 3, 10, 50}), xax = P.axis("x_edges", xdef);
    const auto a = amicale(s, sax, xax, N, ctx, o);
    write_file(out / ("amicale_" + tag + "_lhs.csv"), [&](std::ostream& os) { write_measure_csv(a.lhs, {"s", "x"}, os); });
    write_file(out / ("amicale_" + tag + "_rhs.csv"), [&](std::ostream& os) { write_measure_csv(a.rhs, {"s", "x"}, os); });
    for (auto& r : amicale_reports(a, sax, xax, N)) reps.push_back(r);
  } else if (c == "slfi") {
    SlfiOptions o;
    o.nodes = static_cast<int>(P.get("nodes", 40));
    o.branch = P.branch();
    reps.push_back(slfi_check(std::get<BivariateSubordinatorSpec>(fx), P.transform(), N, ctx, o));
  } else if (c == "slfi-fluct") {
    FluctOptions o;
    o.nodes = static_cast<int>(P.get("nodes", 40));
    o.branch = P.branch();
    o.passage_cap = P.get("passage_cap", 1e4);
    o.ladder_cap = P.get("ladder_cap", 1e4);
    const auto nr = P.cs.params.contains("N_rhs") ? count(P.cs.params.at("N_rhs"), cs.path + ".N_rhs") : 10 * N;
    reps.push_back(slfi_fluct_check(std::get<ProcessSpec>(fx), P.transform(), N, nr, ctx, o));
  } else if (c == "wiener-hopf") {
    for (auto& r : wiener_hopf_check(std::get<ProcessSpec>(fx), P.list("a", {0.5, 1, 2}), N, ctx)) reps.push_back(r);
  } else if (c == "resolvent") {
    reps.push_back(check_resolvent_creep(std::get<ProcessSpec>(fx), P.get("q", 1.0), P.get("u", 0.5),
                                         P.get("delta", 0.005), N, ctx));
  } else if (c == "alpha") {
    const auto& s = std::get<ProcessSpec>(fx);
    const auto walk = LatticeWalkSpec::from_process(s);
    const auto m = static_cast<std::size_t>(walk.m());
    reps.push_back(check_alpha(s, Axis::lattice(static_cast<std::size_t>(P.get("v_max", static_cast<double>(m))), walk.h),
                               Axis::lattice(static_cast<std::size_t>(P.get("x_max", static_cast<double>(m))), walk.h),
                               P.axis("s_edges", {0, 0.5, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000}), N, ctx));
  }
  for (auto& r : reps) {
    r.fixture = cs.fixture;
    r.params = cs.params.dump() + (r.params.empty() ? "" : "|" + r.params);
  }
  return reps;
}

}  // namespace detail

inline void write_summary_csv(const std::vector<CheckReport>& reps, std::ostream& os) {
  CsvWriter w(os);
  w.header({"check", "fixture", "params_hash", "lhs", "rhs", "distance", "budget", "pass"});
  for (const auto& r : reps) w.row(r.check, r.fixture, params_hash(r.params), r.lhs, r.rhs, r.distance, r.budget, r.pass ? "PASS" : "FAIL");
}

// Nonzero iff some row fails.
inline int exit_status(const std::vector<CheckReport>& reps) {
  return std::any_of(reps.begin(), reps.end(), [](const CheckReport& r) { return !r.pass; }) ? 1 : 0;
}

// Validates every check, then runs them in order. The stream domain of a check is
// derived from its parameters, so results do not depend on the check order.
inline RunResult run(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& log = std::cout) {
  for (const auto& cs : cfg.checks) validate_check(cs, cfg.fixtures.at(cs.fixture));
  const std::filesystem::path out(opt.out_dir);
  std::filesystem::create_directories(out);
  RunResult res;
  for (std::size_t i = 0; i < cfg.checks.size(); ++i) {
    const auto& cs = cfg.checks[i];
    McContext ctx;
    ctx.policy.seed = opt.seed;
    ctx.policy.chunk_size = cfg.chunk_size;
    ctx.workers = opt.workers;
    ctx.domain = fnv1a(cs.fixture + "|" + cs.params.dump()) >> 8;
    const std::uint64_t N = detail::Params{cs}.n(cfg.N);
    std::vector<CheckReport> reps;
    try {
      reps = detail::run_check(cs, cfg.fixtures.at(cs.fixture), N, ctx, out, i);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      CheckReport r;
      r.check = cs.check;
      r.fixture = cs.fixture;
      r.params = cs.params.dump();
      r.n = N;
      r.distance = kInf;
      r.budget = 0.0;
      r.pass = false;
      r.note = std::string("runtime failure: ") + e.what();
      reps.push_back(r);
    }
    for (auto& r : reps) {
      log << summary_line(r) << '\n';
      res.reports.push_back(r);
    }
  }
  detail::write_file(out / "summary.csv", [&](std::ostream& os) { write_summary_csv(res.reports, os); });
  detail::write_file(out / "reports.csv", [&](std::ostream& os) { write_reports_csv(res.reports, os); });
  detail::write_file(out / "summary.txt", [&](std::ostream& os) {
    for (const auto& r : res.reports) os << summary_line(r) << '\n';
  });
  res.exit_status = exit_status(res.reports);
  return res;
}

// ---------------------------------------------------------------------------
// Plot data: long-format CSVs (figure, series, x, y, se) from stored results.

inline std::vector<std::string> report_plotdata(const std::string& results_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(results_dir);
  if (!fs::is_directory(dir)) throw std::runtime_error("results directory not found: " + results_dir);
  std::vector<fs::path> p_files, v_files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("p_", 0) == 0 && e.path().extension() == ".csv") p_files.push_back(e.path());
    if (name.rfind("V_", 0) == 0 && e.path().extension() == ".csv" && name.find("_exact") == std::string::npos &&
        name.find("_MC.csv") == std::string::npos)
      v_files.push_back(e.path());
  }
  if (p_files.empty() && v_files.empty())
    throw std::runtime_error("no p_*.csv or V_*.csv inputs in " + results_dir);
  std::sort(p_files.begin(), p_files.end());
  std::sort(v_files.begin(), v_files.end());
  std::vector<std::string> written;
  if (!p_files.empty()) {
    const auto path = dir / "plot_p_vs_u.csv";
    detail::write_file(path, [&](std::ostream& os) {
      CsvWriter w(os);
      w.header({"figure", "series", "x", "y", "se"});
      for (const auto& f : p_files) {
        const auto t = read_csv(f.string());
        const auto it = t.col("t"), iu = t.col("u"), ip = t.col("p"), is = t.col("SE");
        for (const auto& row : t.rows)
          w.row(f.stem().string(), "t=" + row[it], std::stod(row[iu]), std::stod(row[ip]), std::stod(row[is]));
      }
    });
    written.push_back(path.string());
  }
  if (!v_files.empty()) {
    const auto path = dir / "plot_dV_vs_u.csv";
    detail::write_file(path, [&](std::ostream& os) {
      CsvWriter w(os);
      w.header({"figure", "series", "x", "y", "se"});
      for (const auto& f : v_files) {
        const auto t = read_csv(f.string());
        const auto it = t.col("t"), iu = t.col("u"), iv = t.col("V"), is = t.col("SE");
        // rows are t-major; left differences along u within each t
        for (std::size_t k = 1; k < t.rows.size(); ++k) {
          const auto& a = t.rows[k - 1];
          const auto& b = t.rows[k];
          if (a[it] != b[it]) continue;
          const double du = std::stod(b[iu]) - std::stod(a[iu]);
          w.row(f.stem().string(), "t=" + b[it], std::stod(b[iu]), (std::stod(b[iv]) - std::stod(a[iv])) / du,
                (std::stod(b[is]) + std::stod(a[is])) / du);
        }
      }
    });
    written.push_back(path.string());
  }
  return written;
}

}  // namespace levyfv::cli
