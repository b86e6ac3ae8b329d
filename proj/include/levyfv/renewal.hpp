#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "levyfv/csv.hpp"
#include "levyfv/parallel.hpp"
#include "levyfv/passage_mc.hpp"
#include "levyfv/report.hpp"
#include "levyfv/rw_ladder.hpp"
#include "levyfv/stats.hpp"

namespace levyfv {

struct RenewalGrid {
  std::vector<double> t;
  std::vector<double> u;
  std::vector<EstimateWithError> V;  // row-major, t outer
  std::string provenance = "MC";

  const EstimateWithError& at(std::size_t i, std::size_t j) const { return V[i * u.size() + j]; }
  EstimateWithError& at(std::size_t i, std::size_t j) { return V[i * u.size() + j]; }
};

namespace detail {

inline void check_grid(const std::vector<double>& g, const char* name, bool allow_zero = false) {
  if (g.empty()) throw std::invalid_argument(std::string(name) + "-grid is empty");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] > 0.0 || (allow_zero && g[i] == 0.0)) || !std::isfinite(g[i]))
      throw std::invalid_argument(std::string(name) + (allow_zero ? "-grid must be nonnegative" : "-grid must be positive"));
    if (i > 0 && !(g[i] > g[i - 1])) throw std::invalid_argument(std::string(name) + "-grid must be strictly increasing");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Per-path functionals, out[i * us.size() + j] for (ts[i], us[j]).

// min(T^Z_t, T^Y_u, e(q)) along one killed subordinator path.
template <class Model, class R>
void sub_path_minimum(const Model& model, const std::vector<double>& ts, const std::vector<double>& us, R& rng,
                      std::vector<double>& out) {
  const std::size_t nt = ts.size(), nu = us.size();
  std::vector<double> tz(nt, kInf), ty(nu, kInf);
  double e = rng.exponential(model.q());
  const double dZ = model.dZ(), dY = model.dY();
  std::size_t iz = 0, iy = 0;
  double s = 0.0, Z = 0.0, Y = 0.0;
  for (std::uint64_t step = 0; iz < nt && iy < nu; ++step) {
    if (step > kMaxSubJumps) throw std::runtime_error("subordinator path did not leave the grid");
    const double g = rng.exponential(model.rate());
    for (; iz < nt && dZ > 0.0 && (ts[iz] - Z) / dZ < g; ++iz) tz[iz] = s + (ts[iz] - Z) / dZ;
    for (; iy < nu && dY > 0.0 && (us[iy] - Y) / dY < g; ++iy) ty[iy] = s + (us[iy] - Y) / dY;
    const double tj = s + g;
    if (tj >= e || !std::isfinite(tj)) break;
    if (iz == nt || iy == nu) break;
    Z += dZ * g;
    Y += dY * g;
    const auto j = model.draw(rng);
    if (j.killed) {
      e = tj;
      break;
    }
    if (j.censored) {
      for (; iz < nt; ++iz) tz[iz] = tj;
      break;
    }
    Z += j.dt;
    Y += j.dx;
    for (; iz < nt && Z > ts[iz]; ++iz) tz[iz] = tj;
    for (; iy < nu && Y > us[iy]; ++iy) ty[iy] = tj;
    s = tj;
  }
  out.resize(nt * nu);
  for (std::size_t i = 0; i < nt; ++i)
    for (std::size_t j = 0; j < nu; ++j) {
      const double v = std::min({tz[i], ty[j], e});
      if (!std::isfinite(v)) throw std::runtime_error("renewal function infinite: needs killing or a passage");
      out[i * nu + j] = v;
    }
}

// int_0^{e(q)} 1(Z_s <= t, Y_s <= u) ds along one path.
template <class Model, class R>
void sub_path_occupation(const Model& model, const std::vector<double>& ts, const std::vector<double>& us, R& rng,
                         std::vector<double>& out) {
  const std::size_t nt = ts.size(), nu = us.size();
  out.assign(nt * nu, 0.0);
  const double e = rng.exponential(model.q());
  const double dZ = model.dZ(), dY = model.dY();
  double s = 0.0, Z = 0.0, Y = 0.0;
  for (std::uint64_t step = 0; Z <= ts.back() && Y <= us.back(); ++step) {
    if (step > kMaxSubJumps) throw std::runtime_error("subordinator path did not leave the grid");
    const double g = rng.exponential(model.rate());
    const double len = std::min(g, e - s);
    for (std::size_t i = 0; i < nt; ++i) {
      if (Z > ts[i]) continue;
      const double lz = dZ > 0.0 ? (ts[i] - Z) / dZ : kInf;
      for (std::size_t j = 0; j < nu; ++j) {
        if (Y > us[j]) continue;
        const double ly = dY > 0.0 ? (us[j] - Y) / dY : kInf;
        const double add = std::min({len, lz, ly});
        if (!std::isfinite(add)) throw std::runtime_error("renewal function infinite: needs killing or a passage");
        out[i * nu + j] += add;
      }
    }
    if (s + g >= e || !std::isfinite(g)) break;
    s += g;
    Z += dZ * g;
    Y += dY * g;
    const auto j = model.draw(rng);
    if (j.killed || j.censored) break;
    Z += j.dt;
    Y += j.dx;
  }
}

// int_0^t 1(X_r = Xbar_r, Xbar_r <= u) dr along one X path: the renewal
// function of (L^{-1}, H) with L the time spent at the maximum.
template <class R>
void x_path_occupation(const ProcessSpec& spec, const std::vector<double>& ts, const std::vector<double>& us, R& rng,
                       std::vector<double>& out, std::vector<MaxPiece>& scratch) {
  const std::size_t nt = ts.size(), nu = us.size();
  out.assign(nt * nu, 0.0);
  at_max_pieces(spec, ts.back(), us.back(), rng, scratch);
  const double c = spec.c;
  for (const auto& p : scratch) {
    for (std::size_t j = 0; j < nu; ++j) {
      if (p.m0 > us[j]) continue;
      const double ru = c > 0.0 ? p.r0 + (us[j] - p.m0) / c : kInf;
      for (std::size_t i = 0; i < nt; ++i) {
        const double hi = std::min({p.r1, ts[i], ru});
        if (hi > p.r0) out[i * nu + j] += hi - p.r0;
      }
    }
  }
}

// Number of strict descending epochs with sigma <= t and height <= x.
template <class R>
void x_path_descending_count(const ProcessSpec& spec, const std::vector<double>& ts, const std::vector<double>& xs,
                             R& rng, std::vector<double>& out, std::vector<DescendingEpoch>& scratch) {
  const std::size_t nt = ts.size(), nx = xs.size();
  out.assign(nt * nx, 0.0);
  descending_epochs(spec, ts.back(), xs.back(), rng, scratch);
  for (const auto& ep : scratch)
    for (std::size_t i = 0; i < nt; ++i) {
      if (ep.time > ts[i]) continue;
      for (std::size_t j = 0; j < nx; ++j)
        if (ep.height <= xs[j]) out[i * nx + j] += 1.0;
    }
}

// ---------------------------------------------------------------------------
// Grid estimators

namespace detail {

template <class PathFn>
RenewalGrid grid_estimate(const std::vector<double>& ts, const std::vector<double>& us, std::uint64_t N,
                          const McContext& ctx, PathFn&& fn) {
  check_grid(ts, "t");
  check_grid(us, "u", true);
  StatsArray init(ts.size() * us.size());
  auto res = run_paths(N, ctx, init, [&](Rng& rng, StatsArray& acc, std::uint64_t) {
    thread_local std::vector<double> buf;
    fn(rng, buf);
    for (std::size_t k = 0; k < buf.size(); ++k) acc.add(k, buf[k]);
  });
  RenewalGrid g;
  g.t = ts;
  g.u = us;
  for (std::size_t k = 0; k < res.size(); ++k) g.V.push_back(res.estimate(k));
  return g;
}

}  // namespace detail

// V(t, u) = E[T^Y_u ^ T^Z_t ^ e(q)]
template <class Model>
RenewalGrid estimate_V(const Model& model, const std::vector<double>& ts, const std::vector<double>& us,
                       std::uint64_t N, const McContext& ctx) {
  return detail::grid_estimate(ts, us, N, ctx, [&](Rng& rng, std::vector<double>& buf) {
    sub_path_minimum(model, ts, us, rng, buf);
  });
}

// V(t, u) = E int_0^{e(q)} 1(Z_s <= t, Y_s <= u) ds
template <class Model>
RenewalGrid estimate_V_occupation(const Model& model, const std::vector<double>& ts, const std::vector<double>& us,
                                  std::uint64_t N, const McContext& ctx) {
  return detail::grid_estimate(ts, us, N, ctx, [&](Rng& rng, std::vector<double>& buf) {
    sub_path_occupation(model, ts, us, rng, buf);
  });
}

inline RenewalGrid estimate_V_paths(const ProcessSpec& spec, const std::vector<double>& ts,
                                    const std::vector<double>& us, std::uint64_t N, const McContext& ctx) {
  return detail::grid_estimate(ts, us, N, ctx, [&](Rng& rng, std::vector<double>& buf) {
    thread_local std::vector<MaxPiece> scratch;
    x_path_occupation(spec, ts, us, rng, buf, scratch);
  });
}

inline RenewalGrid estimate_Vhat(const ProcessSpec& spec, const std::vector<double>& ts,
                                 const std::vector<double>& xs, std::uint64_t N, const McContext& ctx) {
  return detail::grid_estimate(ts, xs, N, ctx, [&](Rng& rng, std::vector<double>& buf) {
    thread_local std::vector<DescendingEpoch> scratch;
    x_path_descending_count(spec, ts, xs, rng, buf, scratch);
  });
}

inline RenewalGrid exact_V_grid(const LadderRenewalTable& tab, double lambda, const std::vector<double>& ts,
                                const std::vector<double>& us, bool hat) {
  RenewalGrid g;
  g.t = ts;
  g.u = us;
  g.provenance = "exact";
  for (double t : ts)
    for (double u : us) {
      const auto b = hat ? Vhat_exact(tab, lambda, t, u) : V_exact(tab, lambda, t, u);
      g.V.push_back({b.value, b.bound, 0});
    }
  return g;
}

inline void write_grid_csv(const RenewalGrid& g, std::ostream& os) {
  CsvWriter w(os);
  w.header({"t", "u", "V", "SE", "provenance"});
  for (std::size_t i = 0; i < g.t.size(); ++i)
    for (std::size_t j = 0; j < g.u.size(); ++j) w.row(g.t[i], g.u[j], g.at(i, j).value, g.at(i, j).se, g.provenance);
}

// ---------------------------------------------------------------------------
// Left derivatives

struct LeftDerivative {
  double value = 0.0;  // backward difference over delta
  double se = 0.0;
  double delta = 0.0;
  double coarse = 0.0;  // backward difference over 2 delta
  double refined = 0.0;  // 2 value - coarse
  double bias = 0.0;     // |value - coarse|, estimate of the step-delta bias
};

// From a grid: (V(t,u) - V(t,u - delta)) / delta with u - delta the previous grid point.
// The SE is the correlation-free bound (se_1 + se_2) / delta.
inline LeftDerivative left_derivative(const RenewalGrid& g, std::size_t it, std::size_t iu) {
  if (iu == 0) throw std::invalid_argument("left_derivative: u at the left grid edge");
  LeftDerivative d;
  d.delta = g.u[iu] - g.u[iu - 1];
  d.value = (g.at(it, iu).value - g.at(it, iu - 1).value) / d.delta;
  d.se = (g.at(it, iu).se + g.at(it, iu - 1).se) / d.delta;
  d.coarse = d.value;
  d.refined = d.value;
  if (iu >= 2) {
    const double d2 = g.u[iu] - g.u[iu - 2];
    d.coarse = (g.at(it, iu).value - g.at(it, iu - 2).value) / d2;
    d.refined = 2.0 * d.value - d.coarse;
    d.bias = std::fabs(d.value - d.coarse);
  }
  return d;
}

// Path-level version: differences are taken per path, so the SE is that of the
// difference itself.
template <class PathFn>
LeftDerivative left_derivative_paths(double t, double u, double delta, std::uint64_t N, const McContext& ctx,
                                     PathFn&& fn) {
  if (!(u - 2.0 * delta > 0.0)) throw std::invalid_argument("left_derivative: u too close to the left edge");
  const std::vector<double> ts{t};
  const std::vector<double> us{u - 2.0 * delta, u - delta, u};
  StatsArray init(2);
  auto res = run_paths(N, ctx, init, [&](Rng& rng, StatsArray& acc, std::uint64_t) {
    thread_local std::vector<double> buf;
    fn(ts, us, rng, buf);
    acc.add(0, (buf[2] - buf[1]) / delta);
    acc.add(1, (buf[2] - buf[0]) / (2.0 * delta));
  });
  LeftDerivative d;
  d.delta = delta;
  d.value = res[0].mean();
  d.se = res[0].se();
  d.coarse = res[1].mean();
  d.refined = 2.0 * d.value - d.coarse;
  d.bias = std::fabs(d.value - d.coarse);
  return d;
}

inline LeftDerivative left_derivative_x(const ProcessSpec& spec, double t, double u, double delta, std::uint64_t N,
                                        const McContext& ctx) {
  return left_derivative_paths(t, u, delta, N, ctx, [&](const auto& ts, const auto& us, Rng& rng, auto& buf) {
    thread_local std::vector<MaxPiece> scratch;
    x_path_occupation(spec, ts, us, rng, buf, scratch);
  });
}

template <class Model>
LeftDerivative left_derivative_sub(const Model& model, double t, double u, double delta, std::uint64_t N,
                                   const McContext& ctx) {
  return left_derivative_paths(t, u, delta, N, ctx, [&](const auto& ts, const auto& us, Rng& rng, auto& buf) {
    sub_path_minimum(model, ts, us, rng, buf);
  });
}

// ---------------------------------------------------------------------------
// Integrated creeping identity: int_0^u p(t, v) dv = d_Y V(t, u)

// Points in (0, u) where p(t, .) may jump: k h and k h + d_Y t / d_Z for a
// lattice of upward jump sizes with spacing h.
inline std::vector<double> lattice_breakpoints(double h, double shift, double u) {
  std::set<double> pts;
  if (h > 0.0)
    for (long k = 0; k * h < u; ++k) {
      for (double b : {k * h, k * h + shift})
        if (b > 1e-12 && b < u - 1e-12) pts.insert(b);
    }
  return {pts.begin(), pts.end()};
}

namespace detail {

struct Quadrature {
  std::vector<double> nodes;    // increasing, all > 0
  std::vector<double> w_fine;   // trapezoid weights, step h
  std::vector<double> w_coarse; // trapezoid weights, step 2h
};

// Piecewise trapezoid rule on [0, u] with pieces split at the breakpoints.
// Each piece uses its right-limit at the left end and its value at the right end.
inline Quadrature piecewise_trapezoid(double u, const std::vector<double>& breaks, int per_piece) {
  std::vector<double> ends{0.0};
  for (double b : breaks) ends.push_back(b);
  ends.push_back(u);
  const int n = std::max(2, per_piece + per_piece % 2);
  Quadrature q;
  for (std::size_t p = 0; p + 1 < ends.size(); ++p) {
    const double a = ends[p], b = ends[p + 1];
    const double h = (b - a) / n;
    for (int i = 0; i <= n; ++i) {
      double x = a + i * h;
      if (i == 0) x = a + 1e-9 * std::max(1.0, u);
      if (i == n) x = b;
      q.nodes.push_back(x);
      const double wf = (i == 0 || i == n) ? h / 2 : h;
      double wc = 0.0;
      if (i % 2 == 0) wc = (i == 0 || i == n) ? h : 2 * h;
      q.w_fine.push_back(wf);
      q.w_coarse.push_back(wc);
    }
  }
  return q;
}

}  // namespace detail

struct SubpintOptions {
  int nodes_per_piece = 16;
  std::vector<double> breakpoints;  // p(t, .) discontinuities inside (0, u)
};

inline std::vector<double> default_breakpoints(const ProcessSpec& spec, double t, double u) {
  if (const auto* d = spec.jumps.atoms()) {
    if (spec.c > 0.0) return lattice_breakpoints(LatticeWalkSpec::from_process(spec).h, spec.c * t, u);
    (void)d;
  }
  return {};
}

inline std::vector<double> default_breakpoints(const BivariateSubordinatorSpec& spec, double t, double u) {
  std::vector<double> dx;
  for (const auto& a : spec.atoms)
    if (a.dx > 0.0) dx.push_back(a.dx);
  if (dx.empty() || spec.dZ <= 0.0) return {};
  double h = *std::min_element(dx.begin(), dx.end());
  for (int n = 1; n <= 1000; ++n) {
    const double cand = h / n;
    bool ok = std::all_of(dx.begin(), dx.end(), [&](double x) {
      return std::fabs(x / cand - std::round(x / cand)) < 1e-9 * std::max(1.0, x / cand);
    });
    if (ok) {
      h = cand;
      break;
    }
  }
  return lattice_breakpoints(h, spec.dY * t / spec.dZ, u);
}

inline CheckReport check_subpint(const ProcessSpec& spec, double t, double u, std::uint64_t N, const McContext& ctx,
                                 SubpintOptions opt = {}) {
  if (opt.breakpoints.empty()) opt.breakpoints = default_breakpoints(spec, t, u);
  CheckReport r;
  r.check = "subpint";
  r.params = "t=" + fmt(t) + ";u=" + fmt(u);
  r.n = N;
  if (spec.c <= 0.0) {
    r.note = "no creeping, both sides 0";
    r.pass = true;
    return r;
  }
  const auto q = detail::piecewise_trapezoid(u, opt.breakpoints, opt.nodes_per_piece);
  StatsArray init(2);
  auto lhs = run_paths(N, ctx.sub(0), init, [&](Rng& rng, StatsArray& acc, std::uint64_t) {
    thread_local std::vector<PassageRecord> recs;
    first_passage_levels(spec, q.nodes, t, rng, recs);
    double f = 0.0, c = 0.0;
    for (std::size_t i = 0; i < recs.size(); ++i)
      if (recs[i].creep && recs[i].tau <= t) {
        f += q.w_fine[i];
        c += q.w_coarse[i];
      }
    acc.add(0, f);
    acc.add(1, c);
  });
  const auto V = estimate_V_paths(spec, {t}, {u}, N, ctx.sub(1));
  r.lhs = lhs[0].mean();
  r.se_lhs = lhs[0].se();
  r.rhs = spec.c * V.at(0, 0).value;
  r.se_rhs = spec.c * V.at(0, 0).se;
  const double quad = std::fabs(lhs[0].mean() - lhs[1].mean()) / 3.0;
  r.distance = std::fabs(r.lhs - r.rhs);
  r.budget = 3.0 * combined_se(r.se_lhs, r.se_rhs) + quad;
  r.pass = r.distance <= r.budget;
  r.note = "quadrature bound " + fmt(quad);
  return r;
}

inline CheckReport check_subpint(const BivariateSubordinatorSpec& spec, double t, double u, std::uint64_t N,
                                 const McContext& ctx, SubpintOptions opt = {}) {
  if (opt.breakpoints.empty()) opt.breakpoints = default_breakpoints(spec, t, u);
  CheckReport r;
  r.check = "subpint";
  r.params = "t=" + fmt(t) + ";u=" + fmt(u);
  r.n = N;
  if (spec.dY <= 0.0) {
    r.note = "no creeping, both sides 0";
    r.pass = true;
    return r;
  }
  const AtomModel model(spec);
  const auto q = detail::piecewise_trapezoid(u, opt.breakpoints, opt.nodes_per_piece);
  StatsArray init(2);
  auto lhs = run_paths(N, ctx.sub(0), init, [&](Rng& rng, StatsArray& acc, std::uint64_t) {
    thread_local std::vector<SubPassageRecord> recs;
    biv_passage_levels(model, q.nodes, rng, recs);
    double f = 0.0, c = 0.0;
    for (std::size_t i = 0; i < recs.size(); ++i)
      if (recs[i].creep() && recs[i].z_before <= t) {
        f += q.w_fine[i];
        c += q.w_coarse[i];
      }
    acc.add(0, f);
    acc.add(1, c);
  });
  const auto V = estimate_V(model, {t}, {u}, N, ctx.sub(1));
  r.lhs = lhs[0].mean();
  r.se_lhs = lhs[0].se();
  r.rhs = spec.dY * V.at(0, 0).value;
  r.se_rhs = spec.dY * V.at(0, 0).se;
  const double quad = std::fabs(lhs[0].mean() - lhs[1].mean()) / 3.0;
  r.distance = std::fabs(r.lhs - r.rhs);
  r.budget = 3.0 * combined_se(r.se_lhs, r.se_rhs) + quad;
  r.pass = r.distance <= r.budget;
  r.note = "quadrature bound " + fmt(quad);
  return r;
}

// Creeping-time identity p(t, u) = d_H dV(t, u) / du- for a process with c > 0.
inline CheckReport check_ct1(const ProcessSpec& spec, double t, double u, double delta, std::uint64_t N,
                             const McContext& ctx) {
  CheckReport r;
  r.check = "ct1";
  r.params = "t=" + fmt(t) + ";u=" + fmt(u) + ";delta=" + fmt(delta);
  r.n = N;
  const auto p = estimate_p(spec, t, u, N, ctx.sub(0));
  r.lhs = p.value;
  r.se_lhs = p.se;
  if (spec.c <= 0.0) {
    r.rhs = 0.0;
    r.pass = p.value == 0.0;
    r.note = "no creeping";
    return r;
  }
  const auto d = left_derivative_x(spec, t, u, delta, N, ctx.sub(1));
  r.rhs = spec.c * d.value;
  r.se_rhs = spec.c * d.se;
  const double bias = spec.c * d.bias;
  r.distance = std::fabs(r.lhs - r.rhs);
  r.budget = 3.0 * combined_se(r.se_lhs, r.se_rhs) + bias;
  r.pass = r.distance <= r.budget;
  r.note = "delta bias " + fmt(bias) + ", refined rhs " + fmt(spec.c * d.refined);
  return r;
}

}  // namespace levyfv
