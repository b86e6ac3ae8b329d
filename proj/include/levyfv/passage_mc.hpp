#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "levyfv/csv.hpp"
#include "levyfv/parallel.hpp"
#include "levyfv/processes.hpp"
#include "levyfv/stats.hpp"

namespace levyfv {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct PassageRecord {
  double u = 0.0;
  double tau = kInf;
  double x_at = 0.0;
  double x_before = 0.0;
  double max_before = 0.0;
  double g_before = 0.0;
  bool creep = false;

  bool censored() const { return !std::isfinite(tau); }
  double x() const { return x_at - u; }
  double v() const { return u - x_before; }
  double y() const { return u - max_before; }
  double s() const { return tau - g_before; }
  double t() const { return g_before; }
};

// Counts of events that must never be observed.
struct Monitors {
  std::uint64_t paths = 0;
  std::uint64_t creep_from_below = 0;   // creep together with X_{tau-} < u
  std::uint64_t dz_without_dy = 0;      // Delta Z > 0 and Delta Y = 0 at passage

  void merge(const Monitors& o) {
    paths += o.paths;
    creep_from_below += o.creep_from_below;
    dz_without_dy += o.dz_without_dy;
  }
  void observe(const PassageRecord& r) {
    if (r.creep && r.x_before < r.u) ++creep_from_below;
  }
};

// First passage above each of the increasing levels along one path. Creeping
// inside a drift segment is decided by (u - w) / c < g on the exact gap g.
template <class R>
void first_passage_levels(const ProcessSpec& spec, const std::vector<double>& levels, double cap, R& rng,
                          std::vector<PassageRecord>& out) {
  const std::size_t n = levels.size();
  out.assign(n, PassageRecord{});
  for (std::size_t i = 0; i < n; ++i) {
    if (!(levels[i] > 0.0)) throw std::invalid_argument("passage levels must be positive");
    if (i > 0 && levels[i] < levels[i - 1]) throw std::invalid_argument("passage levels must be increasing");
    out[i].u = levels[i];
  }
  const double c = spec.c;
  std::size_t next = 0;
  double s = 0.0, jsum = 0.0, M = 0.0, G = 0.0, prev_left = 0.0;
  bool after_jump = false;
  while (next < n) {
    const double w = c * s + jsum;
    const double g = rng.exponential(spec.lambda);
    if (c > 0.0) {
      for (; next < n; ++next) {
        const double u = levels[next];
        const double dt = (u - w) / c;
        if (!(dt < g)) break;
        const double tau = s + dt;
        if (tau > cap) return;
        auto& r = out[next];
        r.tau = tau;
        r.x_at = u;
        r.creep = true;
        r.g_before = tau;
        if (dt == 0.0 && after_jump) {  // a jump landed exactly on u
          r.x_before = prev_left;
          r.max_before = std::min(M, u);
        } else {
          r.x_before = u;
          r.max_before = u;
        }
      }
      if (next == n) return;
    }
    const double tj = s + g;
    if (!(tj <= cap)) return;
    const double we = w + c * g;
    if (c > 0.0) {
      if (we >= M) {
        M = we;
        G = tj;
      }
    } else if (c == 0.0 && w == M) {
      G = tj;
    }
    const double y = spec.jumps.sample(rng);
    jsum += y;
    const double wn = c * tj + jsum;
    for (; next < n && wn > levels[next]; ++next) {
      auto& r = out[next];
      r.tau = tj;
      r.x_at = wn;
      r.x_before = we;
      r.max_before = M;
      r.g_before = G;
      r.creep = false;
    }
    s = tj;
    prev_left = we;
    after_jump = true;
    if (wn >= M) {
      M = wn;
      G = tj;
    }
  }
}

template <class R>
PassageRecord first_passage(const ProcessSpec& spec, double u, double cap, R& rng) {
  std::vector<PassageRecord> out;
  first_passage_levels(spec, {u}, cap, rng, out);
  return out[0];
}

// p(t, u) = P(tau_u <= t, X_{tau_u} = u); binomial estimate.
inline std::vector<EstimateWithError> estimate_p_levels(const ProcessSpec& spec, double t,
                                                        const std::vector<double>& levels, std::uint64_t N,
                                                        const McContext& ctx, Monitors* mon = nullptr) {
  struct Acc {
    std::vector<std::uint64_t> hits;
    Monitors mon;
    void merge(const Acc& o) {
      for (std::size_t i = 0; i < hits.size(); ++i) hits[i] += o.hits[i];
      mon.merge(o.mon);
    }
  };
  Acc init{std::vector<std::uint64_t>(levels.size(), 0), {}};
  if (spec.c <= 0.0) {  // no creeping without positive drift
    std::vector<EstimateWithError> z(levels.size(), EstimateWithError{0.0, 0.0, N});
    return z;
  }
  auto res = run_paths(N, ctx, init, [&](Rng& rng, Acc& acc, std::uint64_t) {
    std::vector<PassageRecord> recs;
    first_passage_levels(spec, levels, t, rng, recs);
    ++acc.mon.paths;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      acc.mon.observe(recs[i]);
      if (recs[i].creep && recs[i].tau <= t) ++acc.hits[i];
    }
  });
  if (mon) mon->merge(res.mon);
  std::vector<EstimateWithError> out;
  for (auto h : res.hits) out.push_back(binomial_estimate(h, N));
  return out;
}

inline EstimateWithError estimate_p(const ProcessSpec& spec, double t, double u, std::uint64_t N,
                                    const McContext& ctx, Monitors* mon = nullptr) {
  if (!(t > 0.0) || !(u > 0.0)) throw std::invalid_argument("estimate_p needs t, u > 0");
  return estimate_p_levels(spec, t, {u}, N, ctx, mon)[0];
}

inline void write_records_csv(const std::vector<PassageRecord>& recs, std::ostream& os) {
  CsvWriter w(os);
  w.header({"u", "tau", "x", "v", "y", "s", "t", "creep", "censored"});
  for (const auto& r : recs) {
    if (r.censored())
      w.row(r.u, r.tau, kInf, kInf, kInf, kInf, kInf, false, true);
    else
      w.row(r.u, r.tau, r.x(), r.v(), r.y(), r.s(), r.t(), r.creep, false);
  }
}

// ---------------------------------------------------------------------------
// Ladder jumps and the alpha experiment

struct LadderJump {
  double dt = 0.0;  // Delta L^{-1}
  double dx = 0.0;  // Delta H
  bool censored = false;
  bool by_drift = false;
};

// One jump of (L^{-1}, H) under L = time spent at the (weak) maximum. A jump of
// X at the maximum is positive, giving (0, Y), or negative, starting an
// excursion that ends when X gets back to the old maximum.
template <class R>
LadderJump ladder_jump(const ProcessSpec& spec, R& rng, double cap = kInf) {
  if (spec.c < 0.0) throw std::invalid_argument("ladder_jump needs c >= 0");
  const double c = spec.c;
  const double y = spec.jumps.sample(rng);
  if (y > 0.0) return {0.0, y, false, false};
  double p = y, r = 0.0;
  for (;;) {
    const double g = rng.exponential(spec.lambda);
    if (c > 0.0 && -p / c < g) {
      const double R0 = r - p / c;
      if (R0 > cap) return {kInf, 0.0, true, false};
      return {R0, 0.0, false, true};
    }
    r += g;
    if (r > cap) return {kInf, 0.0, true, false};
    p += c * g + spec.jumps.sample(rng);
    if (p >= 0.0) return {r, p, false, false};
  }
}

struct AlphaSample {
  double v = 0.0;  // -X_{alpha-}
  double x = 0.0;  // X_alpha
  double s = 0.0;  // alpha - sigma_1
  bool censored = false;
};

// alpha = inf{t > sigma_1 : X_t >= 0} for a zero-drift compound Poisson process.
template <class R>
AlphaSample alpha_experiment(const ProcessSpec& spec, R& rng, double cap = kInf) {
  if (!spec.compound_poisson()) throw std::invalid_argument("alpha_experiment needs zero drift and positive rate");
  double p = spec.jumps.sample(rng);
  if (p >= 0.0) return {0.0, p, 0.0, false};
  double r = 0.0;
  for (;;) {
    r += rng.exponential(spec.lambda);
    if (r > cap) return {0.0, 0.0, kInf, true};
    const double before = p;
    p += spec.jumps.sample(rng);
    if (p >= 0.0) return {-before, p, r, false};
  }
}

// ---------------------------------------------------------------------------
// Path pieces used by the renewal estimators

// The path sits at its running maximum on [r0, r1), where the maximum grows
// from m0 with slope c.
struct MaxPiece {
  double r0, r1, m0;
};

template <class R>
void at_max_pieces(const ProcessSpec& spec, double t_max, double x_max, R& rng, std::vector<MaxPiece>& out) {
  if (spec.c < 0.0) throw std::invalid_argument("at_max_pieces needs c >= 0");
  out.clear();
  const double c = spec.c;
  double s = 0.0, jsum = 0.0, M = 0.0;
  while (s < t_max && M <= x_max) {
    const double w = c * s + jsum;
    const double g = rng.exponential(spec.lambda);
    const double e = std::min(s + g, t_max);
    if (w >= M) {
      out.push_back({s, e, w});
    } else if (c > 0.0) {
      const double a = s + (M - w) / c;
      if (a < e) out.push_back({a, e, M});
    }
    if (!(s + g < t_max)) break;
    s += g;
    if (c > 0.0) M = std::max(M, c * s + jsum);
    jsum += spec.jumps.sample(rng);
    M = std::max(M, c * s + jsum);
  }
}

struct DescendingEpoch {
  double time;    // sigma at the epoch
  double height;  // -X at the epoch
};

// Strict descending ladder epochs of X (new strict minima), including the
// epoch at time 0. Needs c >= 0 so minima only change at jumps.
template <class R>
void descending_epochs(const ProcessSpec& spec, double t_max, double h_max, R& rng, std::vector<DescendingEpoch>& out) {
  if (spec.c < 0.0) throw std::invalid_argument("descending_epochs needs c >= 0");
  out.assign(1, {0.0, 0.0});
  double s = 0.0, jsum = 0.0, m = 0.0;
  for (;;) {
    s += rng.exponential(spec.lambda);
    if (!(s <= t_max)) return;
    jsum += spec.jumps.sample(rng);
    const double x = spec.c * s + jsum;
    if (x < m) {
      m = x;
      if (-m > h_max) return;
      out.push_back({s, -m});
    }
  }
}

// ---------------------------------------------------------------------------
// Killed bivariate subordinators

struct JumpDraw {
  double dt = 0.0;
  double dx = 0.0;
  bool killed = false;    // jump to the cemetery
  bool censored = false;  // jump beyond the simulation cap
};

class AtomModel {
 public:
  explicit AtomModel(const BivariateSubordinatorSpec& s) : spec_(s) {
    s.validate();
    double c = 0.0;
    for (const auto& a : s.atoms) {
      c += a.rate;
      cum_.push_back(c);
    }
  }
  double dZ() const { return spec_.dZ; }
  double dY() const { return spec_.dY; }
  double q() const { return spec_.q; }
  double rate() const { return cum_.empty() ? 0.0 : cum_.back(); }
  const BivariateSubordinatorSpec& spec() const { return spec_; }

  template <class R>
  JumpDraw draw(R& rng) const {
    const double u = rng.uniform() * rate();
    std::size_t i = 0;
    while (i + 1 < cum_.size() && u >= cum_[i]) ++i;
    return {spec_.atoms[i].dt, spec_.atoms[i].dx, false, false};
  }

 private:
  BivariateSubordinatorSpec spec_;
  std::vector<double> cum_;
};

// (L^{-1}, H) of a process with c >= 0: drifts (1, c), jumps at rate lambda.
class LadderModel {
 public:
  LadderModel(const ProcessSpec& s, double cap) : spec_(s), cap_(cap) {
    if (s.c < 0.0) throw std::invalid_argument("ladder model needs c >= 0");
  }
  double dZ() const { return 1.0; }
  double dY() const { return spec_.c; }
  double q() const { return 0.0; }
  double rate() const { return spec_.lambda; }
  const ProcessSpec& spec() const { return spec_; }

  template <class R>
  JumpDraw draw(R& rng) const {
    const auto j = ladder_jump(spec_, rng, cap_);
    if (j.censored) return {kInf, kInf, false, true};
    return {j.dt, j.dx, false, false};
  }

 private:
  ProcessSpec spec_;
  double cap_;
};

struct SubPassageRecord {
  double u = 0.0;
  double T = kInf;
  double z_before = 0.0;
  double dz = 0.0;
  double y_before = 0.0;
  double y_at = 0.0;
  bool killed = false;
  bool censored = false;

  bool passed() const { return !killed && !censored; }
  bool creep() const { return passed() && y_at == u; }
};

inline constexpr std::uint64_t kMaxSubJumps = 100'000'000;

// T = inf{s : Y_s > u} for each increasing level, with independent killing.
template <class Model, class R>
void biv_passage_levels(const Model& model, const std::vector<double>& levels, R& rng,
                        std::vector<SubPassageRecord>& out) {
  const std::size_t n = levels.size();
  out.assign(n, SubPassageRecord{});
  for (std::size_t i = 0; i < n; ++i) {
    if (!(levels[i] > 0.0)) throw std::invalid_argument("passage levels must be positive");
    out[i].u = levels[i];
  }
  const double e = rng.exponential(model.q());
  const double dZ = model.dZ(), dY = model.dY();
  std::size_t next = 0;
  double s = 0.0, Z = 0.0, Y = 0.0;
  auto finish = [&](bool killed) {
    for (; next < n; ++next) (killed ? out[next].killed : out[next].censored) = true;
  };
  for (std::uint64_t step = 0; next < n; ++step) {
    if (step > kMaxSubJumps) return finish(false);
    const double g = rng.exponential(model.rate());
    if (dY > 0.0) {
      for (; next < n; ++next) {
        const double dt = (levels[next] - Y) / dY;
        if (!(dt < g)) break;
        if (s + dt >= e) return finish(true);
        auto& r = out[next];
        r.T = s + dt;
        r.z_before = Z + dZ * dt;
        r.dz = 0.0;
        r.y_before = r.y_at = levels[next];
      }
      if (next == n) return;
    }
    const double tj = s + g;
    if (tj >= e) return finish(true);
    if (!std::isfinite(tj)) return finish(false);
    Z += dZ * g;
    Y += dY * g;
    const auto j = model.draw(rng);
    if (j.killed) return finish(true);
    if (j.censored) return finish(false);
    const double yn = Y + j.dx;
    for (; next < n && yn > levels[next]; ++next) {
      auto& r = out[next];
      r.T = tj;
      r.z_before = Z;
      r.dz = j.dt;
      r.y_before = Y;
      r.y_at = yn;
    }
    Z += j.dt;
    Y = yn;
    s = tj;
  }
}

template <class R>
SubPassageRecord biv_passage(const BivariateSubordinatorSpec& spec, double u, R& rng) {
  std::vector<SubPassageRecord> out;
  biv_passage_levels(AtomModel(spec), {u}, rng, out);
  return out[0];
}

inline void observe(Monitors& m, const SubPassageRecord& r) {
  if (r.passed() && r.dz > 0.0 && r.y_at == r.y_before) ++m.dz_without_dy;
}

}  // namespace levyfv
