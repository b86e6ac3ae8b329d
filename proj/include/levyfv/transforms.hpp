#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "levyfv/parallel.hpp"
#include "levyfv/passage_mc.hpp"
#include "levyfv/processes.hpp"
#include "levyfv/report.hpp"
#include "levyfv/rw_ladder.hpp"
#include "levyfv/stats.hpp"

namespace levyfv {

// ell plays the role of the undershoot-of-maximum parameter.
struct TransformParams {
  double mu = 1.0;
  double rho = 2.0;
  double ell = 0.0;
  double nu = 1.0;
  double theta = 1.0;

  std::string str() const {
    return "mu=" + fmt(mu) + ";rho=" + fmt(rho) + ";ell=" + fmt(ell) + ";nu=" + fmt(nu) + ";theta=" + fmt(theta);
  }
};

enum class SlfiBranch { automatic, generic, derivative };

inline constexpr double kBranchTol = 1e-9;

inline bool derivative_case(const TransformParams& p) { return std::fabs(p.mu + p.ell - p.rho) < kBranchTol; }

inline void validate_branch(const TransformParams& p, SlfiBranch b) {
  if (b == SlfiBranch::generic && derivative_case(p))
    throw std::invalid_argument("slfi: ell = rho - mu is not admissible for the generic branch; use the derivative branch");
  if (b == SlfiBranch::derivative && !derivative_case(p))
    throw std::invalid_argument("slfi: the derivative branch needs ell = rho - mu");
}

// Generic branch (kappa(theta, mu + ell) - kappa(theta, rho)) / ((mu + ell - rho) kappa(nu, mu)),
// derivative branch d+kappa(theta, rho)/d+rho / kappa(nu, mu).
template <class Kappa, class KappaDb>
double slfi_rhs(const Kappa& kappa, const KappaDb& kappa_db, const TransformParams& p,
                SlfiBranch b = SlfiBranch::automatic) {
  validate_branch(p, b);
  const double kn = kappa(p.nu, p.mu);
  if (!(kn > 0.0)) throw std::invalid_argument("slfi: kappa(nu, mu) must be positive");
  if (derivative_case(p)) return kappa_db(p.theta, p.rho) / kn;
  return (kappa(p.theta, p.mu + p.ell) - kappa(p.theta, p.rho)) / ((p.mu + p.ell - p.rho) * kn);
}

inline double slfi_rhs(const BivariateSubordinatorSpec& s, const TransformParams& p,
                       SlfiBranch b = SlfiBranch::automatic) {
  return slfi_rhs([&](double a, double x) { return kappa_biv(s, a, x); },
                  [&](double a, double x) { return kappa_biv_db(s, a, x); }, p, b);
}

// ---------------------------------------------------------------------------
// Laplace transform of the renewal measure: E int_0^{e(q)} exp(-a Z_s - b Y_s) ds

template <class Model>
std::vector<EstimateWithError> lt_V(const Model& model, const std::vector<std::pair<double, double>>& ab,
                                    std::uint64_t N, const McContext& ctx) {
  for (const auto& [a, b] : ab) {
    if (a < 0.0 || b < 0.0) throw std::invalid_argument("lt_V needs a, b >= 0");
    if (a == 0.0 && b == 0.0 && model.q() <= 0.0) throw std::invalid_argument("lt_V diverges at a = b = 0 without killing");
  }
  const double dZ = model.dZ(), dY = model.dY();
  StatsArray init(ab.size());
  auto res = run_paths(N, ctx, init, [&](Rng& rng, StatsArray& acc, std::uint64_t) {
    const double e = rng.exponential(model.q());
    std::vector<double> sum(ab.size(), 0.0);
    double s = 0.0, Z = 0.0, Y = 0.0;
    for (std::uint64_t step = 0;; ++step) {
      const double g = rng.exponential(model.rate());
      const double len = std::min(g, e - s);
      double wmax = 0.0;
      for (std::size_t k = 0; k < ab.size(); ++k) {
        const auto [a, b] = ab[k];
        const double w = std::exp(-a * Z - b * Y);
        const double r = a * dZ + b * dY;
        if (r > 0.0)
          sum[k] += w * -std::expm1(-r * len) / r;
        else if (std::isfinite(len))
          sum[k] += w * len;
        else
          throw std::runtime_error("lt_V: transform diverges on this path");
        wmax = std::max(wmax, w);
      }
      // remaining contributions are below 1e-17 of the first segment's weight
      if (!(s + g < e) || step > kMaxSubJumps || wmax < 1e-17) break;
      s += g;
      Z += dZ * g;
      Y += dY * g;
      const auto j = model.draw(rng);
      if (j.killed || j.censored) break;
      Z += j.dt;
      Y += j.dx;
    }
    for (std::size_t k = 0; k < ab.size(); ++k) acc.add(k, sum[k]);
  });
  std::vector<EstimateWithError> out;
  for (std::size_t k = 0; k < ab.size(); ++k) out.push_back(res.estimate(k));
  return out;
}

inline std::vector<CheckReport> check_lt_V(const BivariateSubordinatorSpec& spec,
                                           const std::vector<std::pair<double, double>>& ab, std::uint64_t N,
                                           const McContext& ctx) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [a, b] : ab)
    if (!(a == 0.0 && b == 0.0 && spec.q <= 0.0)) pts.emplace_back(a, b);
  const auto est = lt_V(AtomModel(spec), pts, N, ctx);
  std::vector<CheckReport> out;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double kap = kappa_biv(spec, pts[k].first, pts[k].second);
    CheckReport r;
    r.check = "resolvent-lt";
    r.params = "a=" + fmt(pts[k].first) + ";b=" + fmt(pts[k].second);
    r.n = N;
    r.lhs = est[k].value * kap;
    r.se_lhs = est[k].se * kap;
    r.rhs = 1.0;
    r.distance = std::fabs(r.lhs - 1.0);
    r.budget = 3.0 * r.se_lhs;
    r.pass = r.distance <= r.budget;
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Laplace identity for subordinators and for the fluctuation variables

// Midpoint rule in w = 1 - exp(-mu u): int_0^inf e^{-mu u} g(u) du = (1/mu) int_0^1 g(u(w)) dw.
inline std::vector<double> exp_weight_nodes(double mu, int n) {
  if (!(mu > 0.0)) throw std::invalid_argument("slfi quadrature needs mu > 0");
  std::vector<double> u;
  for (int i = 0; i < n; ++i) u.push_back(-std::log1p(-(i + 0.5) / n) / mu);
  return u;
}

namespace detail {

// h^2/24 * |g'(1) - g'(0)| from one-sided end differences of the node means.
inline double midpoint_error_estimate(const std::vector<double>& g, double mu) {
  const std::size_t n = g.size();
  if (n < 4) return 0.0;
  const double h = 1.0 / static_cast<double>(n);
  const double d0 = (g[1] - g[0]) / h, d1 = (g[n - 1] - g[n - 2]) / h;
  return h * h / 24.0 * std::fabs(d1 - d0) / mu;
}

}  // namespace detail

struct SlfiOptions {
  int nodes = 40;
  SlfiBranch branch = SlfiBranch::automatic;
  double rel_tol = 0.02;
};

inline CheckReport slfi_check(const BivariateSubordinatorSpec& spec, const TransformParams& p, std::uint64_t N,
                              const McContext& ctx, SlfiOptions opt = {}, Monitors* mon = nullptr) {
  CheckReport r;
  r.check = "slfi";
  r.params = p.str();
  r.n = N;
  r.rhs = slfi_rhs(spec, p, opt.branch);
  const auto us = exp_weight_nodes(p.mu, opt.nodes);
  const AtomModel model(spec);
  struct Acc {
    RunningStats total;
    StatsArray node;
    Monitors mon;
    void merge(const Acc& o) {
      total.merge(o.total);
      node.merge(o.node);
      mon.merge(o.mon);
    }
  };
  Acc init{{}, StatsArray(us.size()), {}};
  const double wq = 1.0 / (p.mu * opt.nodes);
  auto res = run_paths(N, ctx, init, [&](Rng& rng, Acc& acc, std::uint64_t) {
    thread_local std::vector<SubPassageRecord> recs;
    biv_passage_levels(model, us, rng, recs);
    ++acc.mon.paths;
    double tot = 0.0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& rc = recs[i];
      observe(acc.mon, rc);
      double f = 0.0;
      if (rc.passed()) {
        const double x = rc.y_at - rc.u, y = rc.u - rc.y_before;
        f = std::exp(-p.rho * x - p.ell * y - p.nu * rc.z_before - p.theta * rc.dz);
      }
      acc.node.add(i, f);
      tot += f;
    }
    acc.total.add(tot * wq);
  });
  if (mon) mon->merge(res.mon);
  std::vector<double> g;
  for (std::size_t i = 0; i < us.size(); ++i) g.push_back(res.node[i].mean());
  const double quad = detail::midpoint_error_estimate(g, p.mu);
  r.lhs = res.total.mean();
  r.se_lhs = res.total.se();
  r.distance = std::fabs(r.lhs - r.rhs) / std::fabs(r.rhs);
  r.budget = opt.rel_tol + 3.0 * r.se_lhs / std::fabs(r.rhs);
  r.pass = r.distance <= r.budget;
  r.note = std::string(derivative_case(p) ? "derivative" : "generic") + " branch, quadrature estimate " + fmt(quad);
  return r;
}

// kappa(a, b) of (L^{-1}, H) from ladder-jump samples:
// kappa(a, b) = a + c b + lambda E[1 - exp(-a R - b J)], censored jumps count as killing.
struct LadderKappaEstimate {
  std::vector<double> value;  // kappa at the requested points, then derivative points
  CovAccumulator cov;
  double lambda = 0.0;
  double censored = 0.0;
};

inline LadderKappaEstimate estimate_ladder_kappa(const ProcessSpec& spec,
                                                 const std::vector<std::pair<double, double>>& pts,
                                                 const std::vector<std::pair<double, double>>& db_pts,
                                                 std::uint64_t N, const McContext& ctx, double cap) {
  const std::size_t d = pts.size() + db_pts.size() + 1;
  struct Acc {
    CovAccumulator c;
    void merge(const Acc& o) { c.merge(o.c); }
  };
  Acc init{CovAccumulator(d)};
  auto res = run_paths(N, ctx, init, [&](Rng& rng, Acc& acc, std::uint64_t) {
    const auto j = ladder_jump(spec, rng, cap);
    std::vector<double> f(d, 0.0);
    for (std::size_t k = 0; k < pts.size(); ++k)
      f[k] = j.censored ? 1.0 : -std::expm1(-pts[k].first * j.dt - pts[k].second * j.dx);
    for (std::size_t k = 0; k < db_pts.size(); ++k)
      f[pts.size() + k] = j.censored ? 0.0 : j.dx * std::exp(-db_pts[k].first * j.dt - db_pts[k].second * j.dx);
    f[d - 1] = j.censored ? 1.0 : 0.0;
    acc.c.add(f);
  });
  LadderKappaEstimate e;
  e.cov = res.c;
  e.lambda = spec.lambda;
  for (std::size_t k = 0; k < pts.size(); ++k)
    e.value.push_back(pts[k].first + spec.c * pts[k].second + spec.lambda * res.c.mean(k));
  for (std::size_t k = 0; k < db_pts.size(); ++k) e.value.push_back(spec.c + spec.lambda * res.c.mean(pts.size() + k));
  e.censored = res.c.mean(d - 1);
  return e;
}

struct FluctOptions {
  int nodes = 40;
  SlfiBranch branch = SlfiBranch::automatic;
  double rel_tol = 0.03;
  double passage_cap = 1e4;
  double ladder_cap = 1e4;
  double censor_budget = 1e-3;
};

// Laplace identity at path level: LHS from first-passage records, RHS from kappa
// estimated through ladder-jump samples. N_lhs paths and N_rhs ladder jumps.
inline CheckReport slfi_fluct_check(const ProcessSpec& spec, const TransformParams& p, std::uint64_t N_lhs,
                                    std::uint64_t N_rhs, const McContext& ctx, FluctOptions opt = {}) {
  if (!(spec.c > 0.0)) throw std::invalid_argument("slfi-fluct needs a creeping fixture (c > 0)");
  validate_branch(p, opt.branch);
  CheckReport r;
  r.check = "slfi-fluct";
  r.params = p.str();
  r.n = N_lhs + N_rhs;
  const auto us = exp_weight_nodes(p.mu, opt.nodes);
  const double wq = 1.0 / (p.mu * opt.nodes);
  struct Acc {
    RunningStats total;
    std::uint64_t censored = 0;
    void merge(const Acc& o) {
      total.merge(o.total);
      censored += o.censored;
    }
  };
  auto lhs = run_paths(N_lhs, ctx.sub(0), Acc{}, [&](Rng& rng, Acc& acc, std::uint64_t) {
    thread_local std::vector<PassageRecord> recs;
    first_passage_levels(spec, us, opt.passage_cap, rng, recs);
    double tot = 0.0;
    for (const auto& rc : recs) {
      if (rc.censored()) {
        ++acc.censored;
        continue;
      }
      tot += std::exp(-p.rho * rc.x() - p.ell * rc.y() - p.nu * rc.t() - p.theta * rc.s());
    }
    acc.total.add(tot * wq);
  });
  const bool deriv = derivative_case(p);
  std::vector<std::pair<double, double>> pts{{p.nu, p.mu}};
  std::vector<std::pair<double, double>> dpts;
  if (deriv) {
    dpts.emplace_back(p.theta, p.rho);
  } else {
    pts.emplace_back(p.theta, p.mu + p.ell);
    pts.emplace_back(p.theta, p.rho);
  }
  const auto k = estimate_ladder_kappa(spec, pts, dpts, N_rhs, ctx.sub(1), opt.ladder_cap);
  const double lam = spec.lambda;
  std::vector<double> grad(pts.size() + dpts.size() + 1, 0.0);
  if (deriv) {
    r.rhs = k.value[1] / k.value[0];
    grad[0] = -lam * k.value[1] / (k.value[0] * k.value[0]);
    grad[1] = lam / k.value[0];
  } else {
    const double D = p.mu + p.ell - p.rho;
    r.rhs = (k.value[1] - k.value[2]) / (D * k.value[0]);
    grad[0] = -lam * (k.value[1] - k.value[2]) / (D * k.value[0] * k.value[0]);
    grad[1] = lam / (D * k.value[0]);
    grad[2] = -lam / (D * k.value[0]);
  }
  r.se_rhs = k.cov.linear_se(grad);
  r.lhs = lhs.total.mean();
  r.se_lhs = lhs.total.se();
  const double cens = static_cast<double>(lhs.censored) / (static_cast<double>(N_lhs) * us.size());
  r.distance = std::fabs(r.lhs - r.rhs) / std::fabs(r.rhs);
  r.budget = opt.rel_tol;
  r.pass = r.distance <= r.budget && cens <= opt.censor_budget && k.censored <= opt.censor_budget;
  r.note = std::string(deriv ? "derivative" : "generic") + " branch, censored passage fraction " + fmt(cens) +
           ", censored ladder fraction " + fmt(k.censored) + ", combined SE " +
           fmt(combined_se(r.se_lhs, r.se_rhs));
  return r;
}

// ---------------------------------------------------------------------------
// Wiener-Hopf normalisation kappa(a, 0) * kappahat(a, 0) = a

// kappahat(a, 0) = 1 / sum_k (lambda / (lambda + a))^k Uhat(k, inf) for a lattice compound Poisson process.
inline BoundedValue kappahat_exact(const ProcessSpec& spec, double a) {
  const auto walk = LatticeWalkSpec::from_process(spec);
  const double r = spec.lambda / (spec.lambda + a);
  std::size_t K = 8;
  while (std::pow(r, static_cast<double>(K + 1)) / (1.0 - r) > 1e-13) K += 8;
  const auto tab = renewal_tables_long(walk, K, static_cast<std::size_t>(walk.m()) * K);
  double s = 0.0, rk = 1.0;
  for (std::size_t k = 0; k <= K; ++k) {
    s += rk * tab.Uhat[k][tab.J];
    rk *= r;
  }
  const double tail = rk / (1.0 - r);
  // 1/s - 1/(s + tail) bounds the error of the reciprocal
  return {1.0 / s, 1.0 / s - 1.0 / (s + tail)};
}

struct WienerHopfOptions {
  double rel_tol = 0.03;
  double ladder_cap_factor = 60.0;  // cap = factor / a
};

inline std::vector<CheckReport> wiener_hopf_check(const ProcessSpec& spec, const std::vector<double>& as,
                                                  std::uint64_t N, const McContext& ctx,
                                                  WienerHopfOptions opt = {}) {
  std::vector<CheckReport> out;
  for (std::size_t i = 0; i < as.size(); ++i) {
    const double a = as[i];
    if (!(a > 0.0)) throw std::invalid_argument("wiener-hopf needs a > 0");
    const auto k = estimate_ladder_kappa(spec, {{a, 0.0}}, {}, N, ctx.sub(2 * i), opt.ladder_cap_factor / a);
    double kh, kh_se = 0.0;
    std::string route;
    if (spec.compound_poisson() && spec.jumps.is_discrete()) {
      const auto e = kappahat_exact(spec, a);
      kh = e.value;
      route = "exact kappahat (bound " + fmt(e.bound) + ")";
    } else {
      StatsArray init(1);
      auto res = run_paths(N, ctx.sub(2 * i + 1), init, [&](Rng& rng, StatsArray& acc, std::uint64_t) {
        thread_local std::vector<DescendingEpoch> eps;
        descending_epochs(spec, opt.ladder_cap_factor / a, kInf, rng, eps);
        double s = 0.0;
        for (const auto& ep : eps) s += std::exp(-a * ep.time);
        acc.add(0, s);
      });
      kh = 1.0 / res[0].mean();
      kh_se = res[0].se() * kh * kh;
      route = "MC kappahat";
    }
    CheckReport r;
    r.check = "wiener-hopf";
    r.params = "a=" + fmt(a);
    r.n = N;
    r.lhs = k.value[0] * kh;
    r.se_lhs = combined_se(spec.lambda * k.cov.linear_se({1.0, 0.0}) * kh, k.value[0] * kh_se);
    r.rhs = a;
    r.distance = std::fabs(r.lhs - a) / a;
    r.budget = opt.rel_tol;
    r.pass = r.distance <= r.budget;
    r.note = route + ", kappa(a,0)=" + fmt(k.value[0]) + ", kappahat(a,0)=" + fmt(kh);
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resolvent creeping check for subordinators:
// E(exp(-qt tau_u); X_{tau_u} = u) = c * d-/du int_0^inf exp(-qt t) P(X_t <= u) dt

inline CheckReport check_resolvent_creep(const ProcessSpec& spec, double qt, double u, double delta, std::uint64_t N,
                                         const McContext& ctx) {
  if (!(spec.c > 0.0) || spec.jumps.has_negative_jumps())
    throw std::invalid_argument("resolvent check needs a subordinator with c > 0");
  if (!(qt > 0.0)) throw std::invalid_argument("resolvent check needs q > 0");
  if (!(u - 2.0 * delta > 0.0)) throw std::invalid_argument("resolvent check: u below the grid spacing");
  CheckReport r;
  r.check = "resolvent";
  r.params = "q=" + fmt(qt) + ";u=" + fmt(u) + ";delta=" + fmt(delta);
  r.n = N;
  StatsArray init(1);
  auto lhs = run_paths(N, ctx.sub(0), init, [&](Rng& rng, StatsArray& acc, std::uint64_t) {
    const auto rc = first_passage(spec, u, kInf, rng);
    acc.add(0, rc.creep ? std::exp(-qt * rc.tau) : 0.0);
  });
  StatsArray init2(2);
  const std::vector<double> levels{u - 2.0 * delta, u - delta, u};
  auto rhs = run_paths(N, ctx.sub(1), init2, [&](Rng& rng, StatsArray& acc, std::uint64_t) {
    thread_local std::vector<PassageRecord> recs;
    first_passage_levels(spec, levels, kInf, rng, recs);
    // int_0^inf e^{-q t} 1(X_t <= v) dt = (1 - e^{-q tau_v}) / q for nondecreasing X
    const double e0 = std::exp(-qt * recs[0].tau), e1 = std::exp(-qt * recs[1].tau), e2 = std::exp(-qt * recs[2].tau);
    acc.add(0, spec.c * (e1 - e2) / (qt * delta));
    acc.add(1, spec.c * (e0 - e2) / (qt * 2.0 * delta));
  });
  r.lhs = lhs[0].mean();
  r.se_lhs = lhs[0].se();
  r.rhs = rhs[0].mean();
  r.se_rhs = rhs[0].se();
  const double bias = std::fabs(rhs[0].mean() - rhs[1].mean());
  r.distance = std::fabs(r.lhs - r.rhs);
  r.budget = 3.0 * combined_se(r.se_lhs, r.se_rhs) + bias;
  r.pass = r.distance <= r.budget;
  r.note = "delta bias " + fmt(bias);
  return r;
}

}  // namespace levyfv
