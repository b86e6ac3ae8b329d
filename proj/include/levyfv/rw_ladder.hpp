#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "levyfv/csv.hpp"
#include "levyfv/processes.hpp"

namespace levyfv {

// Embedded walk on the lattice h*Z.
struct LatticeWalkSpec {
  double h = 1.0;
  std::vector<std::pair<long, Rational>> steps;  // (multiple of h, probability)
  double lambda = 1.0;

  long m() const {
    long r = 0;
    for (const auto& [s, p] : steps) r = std::max(r, std::labs(s));
    return r;
  }

  static LatticeWalkSpec from_process(const ProcessSpec& spec) {
    const auto* d = spec.jumps.atoms();
    if (!d) throw std::invalid_argument("lattice walk needs a discrete jump law");
    double amin = std::numeric_limits<double>::infinity();
    for (const auto& a : d->atoms) amin = std::min(amin, std::fabs(a.value));
    LatticeWalkSpec w;
    w.lambda = spec.lambda;
    for (int n = 1; n <= 1000; ++n) {
      const double h = amin / n;
      bool ok = true;
      for (const auto& a : d->atoms) {
        const double r = a.value / h;
        if (std::fabs(r - std::round(r)) > 1e-9 * std::max(1.0, std::fabs(r))) {
          ok = false;
          break;
        }
      }
      if (ok) {
        w.h = h;
        for (const auto& a : d->atoms) w.steps.emplace_back(std::lround(a.value / h), a.prob);
        return w;
      }
    }
    throw std::invalid_argument("jump atoms do not lie on a common lattice");
  }
};

enum class LadderMode { weak_ascending, strict_ascending, strict_descending };

struct LadderEpoch {
  std::size_t epoch;
  double height;
};

// Epochs k >= 1 of S_0 = 0, S_1, ..., S_n in the requested ladder sense.
// Descending heights are reported as -S_k >= 0.
template <class T>
std::vector<LadderEpoch> ladder_epochs(const std::vector<T>& path, LadderMode mode) {
  std::vector<LadderEpoch> out;
  if (path.empty()) return out;
  T ext = path[0];
  for (std::size_t k = 1; k < path.size(); ++k) {
    const T s = path[k];
    switch (mode) {
      case LadderMode::weak_ascending:
        if (s >= ext) out.push_back({k, static_cast<double>(s)});
        ext = std::max(ext, s);
        break;
      case LadderMode::strict_ascending:
        if (s > ext) out.push_back({k, static_cast<double>(s)});
        ext = std::max(ext, s);
        break;
      case LadderMode::strict_descending:
        if (s < ext) out.push_back({k, -static_cast<double>(s)});
        ext = std::min(ext, s);
        break;
    }
  }
  return out;
}

// U[k][j] = U(k, j h) and Uhat[k][j] = Uhat(k, j h), cumulative in j (heights <= j h).
struct LadderRenewalTable {
  std::size_t K = 0;
  std::size_t J = 0;
  double h = 1.0;
  std::vector<std::vector<double>> U;
  std::vector<std::vector<double>> Uhat;
  std::vector<std::vector<Rational>> U_exact;  // empty unless built by the rational DP
  std::vector<std::vector<Rational>> Uhat_exact;

  std::size_t column(double x) const {
    if (x < 0) throw std::invalid_argument("renewal tables are defined for x >= 0");
    const double r = x / h;
    const auto j = static_cast<std::size_t>(std::floor(r + 1e-9));
    return std::min(j, J);
  }
  double u(std::size_t k, double x) const { return U[k][column(x)]; }
  double uhat(std::size_t k, double x) const { return Uhat[k][column(x)]; }
  // point masses U(k, {j h})
  double u_point(std::size_t k, std::size_t j) const {
    if (j > J) return 0.0;
    return j == 0 ? U[k][0] : U[k][j] - U[k][j - 1];
  }
  double uhat_point(std::size_t k, std::size_t j) const {
    if (j > J) return 0.0;
    return j == 0 ? Uhat[k][0] : Uhat[k][j] - Uhat[k][j - 1];
  }
};

namespace detail {

inline void cumulate(std::vector<std::vector<Rational>>& pts, std::vector<std::vector<double>>& cum_d) {
  cum_d.assign(pts.size(), {});
  for (std::size_t k = 0; k < pts.size(); ++k) {
    Rational acc = 0;
    cum_d[k].resize(pts[k].size());
    for (std::size_t j = 0; j < pts[k].size(); ++j) {
      acc += pts[k][j];
      pts[k][j] = acc;
      cum_d[k][j] = to_double(acc);
    }
  }
}

}  // namespace detail

// Exact tables by a forward DP over (position, gap to the running extremum).
// k is a weak ascending epoch iff the gap to the running maximum is 0 after step k;
// k is a strict descending epoch iff the step takes the walk below the running minimum.
inline LadderRenewalTable renewal_tables(const LatticeWalkSpec& spec, std::size_t K,
                                         std::size_t max_states = 4'000'000) {
  const long m = spec.m();
  if (m == 0) throw std::invalid_argument("walk has no steps");
  const double side = 2.0 * static_cast<double>(m) * static_cast<double>(K) + 1.0;
  if (side * side > static_cast<double>(max_states))
    throw std::length_error("renewal_tables: state space K*m too large for the configured bound");

  LadderRenewalTable t;
  t.K = K;
  t.J = static_cast<std::size_t>(m) * K;
  t.h = spec.h;
  std::vector<std::vector<Rational>> up(K + 1, std::vector<Rational>(t.J + 1));
  std::vector<std::vector<Rational>> dn(K + 1, std::vector<Rational>(t.J + 1));
  up[0][0] = 1;
  dn[0][0] = 1;

  using State = std::pair<long, long>;  // (S, gap)
  std::map<State, Rational> asc{{{0, 0}, Rational(1)}};
  std::map<State, Rational> des{{{0, 0}, Rational(1)}};
  for (std::size_t k = 1; k <= K; ++k) {
    std::map<State, Rational> na, nd;
    for (const auto& [st, p] : asc) {
      for (const auto& [step, q] : spec.steps) {
        const long s = st.first + step;
        const long g = std::max(st.second - step, 0L);
        na[{s, g}] += p * q;
        if (g == 0) up[k][static_cast<std::size_t>(s)] += p * q;
      }
    }
    for (const auto& [st, p] : des) {
      for (const auto& [step, q] : spec.steps) {
        const long s = st.first + step;
        const long d = st.second + step;  // depth above the running minimum
        if (d < 0) dn[k][static_cast<std::size_t>(-s)] += p * q;
        nd[{s, std::max(d, 0L)}] += p * q;
      }
    }
    asc.swap(na);
    des.swap(nd);
  }
  detail::cumulate(up, t.U);
  detail::cumulate(dn, t.Uhat);
  t.U_exact = std::move(up);
  t.Uhat_exact = std::move(dn);
  return t;
}

// Double-precision tables for large K restricted to heights <= J h. Uses the
// reversed walk S'_i = S_k - S_{k-i}: k is a weak ascending epoch iff S'_i >= 0
// for all i <= k, and a strict descending epoch iff S'_i < 0 for all 1 <= i <= k.
inline LadderRenewalTable renewal_tables_long(const LatticeWalkSpec& spec, std::size_t K, std::size_t J) {
  const long m = spec.m();
  if (m == 0) throw std::invalid_argument("walk has no steps");
  std::vector<std::pair<long, double>> st;
  for (const auto& [s, p] : spec.steps) st.emplace_back(s, to_double(p));

  LadderRenewalTable t;
  t.K = K;
  t.J = J;
  t.h = spec.h;
  t.U.assign(K + 1, std::vector<double>(J + 1, 0.0));
  t.Uhat.assign(K + 1, std::vector<double>(J + 1, 0.0));

  auto run = [&](bool ascending, std::vector<std::vector<double>>& out) {
    // ascending: state p = S' >= 0; descending: state p = -S' >= 1 (p = 0 only at i = 0)
    std::vector<double> cur(1, 1.0), nxt;
    out[0][0] = 1.0;
    for (std::size_t i = 1; i <= K; ++i) {
      const long cap = static_cast<long>(J) + m * static_cast<long>(K - i);
      const long hi = std::min<long>(cap, m * static_cast<long>(i));
      nxt.assign(static_cast<std::size_t>(std::max(hi, 0L) + 1), 0.0);
      for (std::size_t p = 0; p < cur.size(); ++p) {
        const double w = cur[p];
        if (w == 0.0) continue;
        for (const auto& [s, q] : st) {
          const long np = ascending ? static_cast<long>(p) + s : static_cast<long>(p) - s;
          if (ascending ? np < 0 : np < 1) continue;
          if (np > hi) continue;
          nxt[static_cast<std::size_t>(np)] += w * q;
        }
      }
      cur.swap(nxt);
      double acc = 0.0;
      for (std::size_t j = 0; j <= J; ++j) {
        if (j < cur.size()) acc += cur[j];
        out[i][j] = acc;
      }
    }
    for (std::size_t j = 1; j <= J; ++j) out[0][j] = out[0][0];
  };
  run(true, t.U);
  run(false, t.Uhat);
  return t;
}

// P(sigma_k <= t) = P(N_t >= k) for k = 0..kmax, N_t ~ Poisson(lambda t).
// Lower tails by forward partial sums, upper tails by backward partial sums.
struct ErlangColumn {
  std::vector<double> cdf;   // P(sigma_k <= t)
  std::vector<double> pmf;   // P(N_t = n), n up to top
  double mu = 0.0;

  // sum_{k > K} P(sigma_{k + shift} <= t) = E (N_t - K - shift + 1)^+
  double tail_sum(std::size_t K, std::size_t shift) const {
    double s = 0.0;
    const double lo = static_cast<double>(K) + static_cast<double>(shift);
    for (std::size_t n = 0; n < pmf.size(); ++n) {
      const double excess = static_cast<double>(n) - lo + 1.0;
      if (excess > 0) s += pmf[n] * excess;
    }
    return s;
  }
};

inline ErlangColumn erlang_column(double lambda, double t, std::size_t kmax) {
  ErlangColumn e;
  e.mu = lambda * t;
  if (!(e.mu > 0.0)) {
    e.cdf.assign(kmax + 1, 0.0);
    e.cdf[0] = 1.0;
    e.pmf = {1.0};
    return e;
  }
  const double mu = e.mu;
  const std::size_t top = std::max<std::size_t>(kmax + 2, static_cast<std::size_t>(mu + 40.0 * std::sqrt(mu) + 60.0));
  e.pmf.resize(top + 1);
  const double lmu = std::log(mu);
  for (std::size_t n = 0; n <= top; ++n)
    e.pmf[n] = std::exp(-mu + static_cast<double>(n) * lmu - std::lgamma(static_cast<double>(n) + 1.0));
  std::vector<double> upper(top + 2, 0.0);
  for (std::size_t n = top + 1; n-- > 0;) upper[n] = upper[n + 1] + e.pmf[n];
  e.cdf.resize(kmax + 1);
  double lower = 0.0;  // P(N < k)
  for (std::size_t k = 0; k <= kmax; ++k) {
    const double v = static_cast<double>(k) <= mu ? 1.0 - lower : (k <= top ? upper[k] : 0.0);
    e.cdf[k] = std::clamp(v, 0.0, 1.0);
    if (k <= top) lower += e.pmf[k];
  }
  return e;
}

struct BoundedValue {
  double value = 0.0;
  double bound = 0.0;  // truncation error bound
};

// V(t, x) = lambda^{-1} sum_k P(sigma_{k+1} <= t) U(k, x)
inline BoundedValue V_exact(const LadderRenewalTable& tab, double lambda, double t, double x) {
  if (t < 0 || x < 0) return {};
  const auto e = erlang_column(lambda, t, tab.K + 1);
  const std::size_t j = tab.column(x);
  double v = 0.0;
  for (std::size_t k = 0; k <= tab.K; ++k) v += e.cdf[k + 1] * tab.U[k][j];
  return {v / lambda, e.tail_sum(tab.K, 1) / lambda};
}

// Vhat(t, x) = sum_k P(sigma_k <= t) Uhat(k, x)
inline BoundedValue Vhat_exact(const LadderRenewalTable& tab, double lambda, double t, double x) {
  if (t < 0 || x < 0) return {};
  const auto e = erlang_column(lambda, t, tab.K);
  const std::size_t j = tab.column(x);
  double v = 0.0;
  for (std::size_t k = 0; k <= tab.K; ++k) v += e.cdf[k] * tab.Uhat[k][j];
  return {v, e.tail_sum(tab.K, 0)};
}

// Smallest K whose truncation bounds for V and Vhat at time t are below tol.
inline std::size_t choose_truncation(double lambda, double t, double tol = 1e-10) {
  const double mu = lambda * t;
  const auto e = erlang_column(lambda, t, 0);
  std::size_t K = static_cast<std::size_t>(mu);
  while (e.tail_sum(K, 1) / lambda >= tol || e.tail_sum(K, 0) >= tol) ++K;
  return K;
}

inline void write_table_csv(const LadderRenewalTable& tab, std::ostream& os) {
  CsvWriter w(os);
  w.header({"k", "j", "U", "Uhat"});
  for (std::size_t k = 0; k <= tab.K; ++k)
    for (std::size_t j = 0; j <= tab.J; ++j) w.row(k, j, tab.U[k][j], tab.Uhat[k][j]);
}

}  // namespace levyfv
