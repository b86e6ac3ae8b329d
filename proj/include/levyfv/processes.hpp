#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "levyfv/rng.hpp"

namespace levyfv {

using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

// Parses "3/8", "0.125", "1e-3" or an integer into an exact rational.
inline Rational parse_rational(const std::string& s) {
  const auto slash = s.find('/');
  if (slash != std::string::npos) {
    Rational num = parse_rational(s.substr(0, slash));
    Rational den = parse_rational(s.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator in '" + s + "'");
    return num / den;
  }
  std::string mant = s;
  long exp10 = 0;
  const auto e = s.find_first_of("eE");
  if (e != std::string::npos) {
    mant = s.substr(0, e);
    exp10 = std::stol(s.substr(e + 1));
  }
  bool neg = false;
  if (!mant.empty() && (mant[0] == '-' || mant[0] == '+')) {
    neg = mant[0] == '-';
    mant = mant.substr(1);
  }
  const auto dot = mant.find('.');
  std::string digits = mant;
  if (dot != std::string::npos) {
    digits = mant.substr(0, dot) + mant.substr(dot + 1);
    exp10 -= static_cast<long>(mant.size() - dot - 1);
  }
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
    throw std::invalid_argument("not a number: '" + s + "'");
  // cpp_int reads a leading 0 as an octal prefix
  const auto nz = digits.find_first_not_of('0');
  boost::multiprecision::cpp_int n(nz == std::string::npos ? std::string("0") : digits.substr(nz));
  boost::multiprecision::cpp_int p = 1;
  for (long i = 0; i < std::labs(exp10); ++i) p *= 10;
  Rational r = exp10 >= 0 ? Rational(n * p) : Rational(n, p);
  return neg ? Rational(-r) : r;
}

struct DiscreteAtoms {
  struct Atom {
    double value;
    Rational prob;
  };
  std::vector<Atom> atoms;
};

struct ExponentialJumps {
  double rate = 1.0;
  int sign = 1;
};

struct UniformJumps {
  double lo = 0.0;
  double hi = 1.0;
};

class JumpLaw {
 public:
  using Variant = std::variant<DiscreteAtoms, ExponentialJumps, UniformJumps>;

  JumpLaw() : v_(ExponentialJumps{}) { prepare(); }
  JumpLaw(Variant v) : v_(std::move(v)) { prepare(); }

  const Variant& variant() const { return v_; }
  const DiscreteAtoms* atoms() const { return std::get_if<DiscreteAtoms>(&v_); }
  bool is_discrete() const { return atoms() != nullptr; }

  template <class R>
  double sample(R& rng) const {
    if (const auto* d = atoms()) {
      const double u = rng.uniform();
      for (std::size_t i = 0; i + 1 < cum_.size(); ++i)
        if (u < cum_[i]) return d->atoms[i].value;
      return d->atoms.back().value;
    }
    if (const auto* e = std::get_if<ExponentialJumps>(&v_)) return e->sign * rng.exponential(e->rate);
    const auto& un = std::get<UniformJumps>(v_);
    return un.lo + (un.hi - un.lo) * rng.uniform();
  }

  double cdf(double x) const {
    if (const auto* d = atoms()) {
      double s = 0.0;
      for (std::size_t i = 0; i < d->atoms.size(); ++i)
        if (d->atoms[i].value <= x) s += pd_[i];
      return std::min(1.0, s);
    }
    if (const auto* e = std::get_if<ExponentialJumps>(&v_)) {
      if (e->sign > 0) return x <= 0.0 ? 0.0 : -std::expm1(-e->rate * x);
      return x >= 0.0 ? 1.0 : std::exp(e->rate * x);
    }
    const auto& un = std::get<UniformJumps>(v_);
    if (x <= un.lo) return 0.0;
    if (x >= un.hi) return 1.0;
    return (x - un.lo) / (un.hi - un.lo);
  }

  // F({v}); zero for the continuous variants.
  double atom_mass(double v) const {
    if (const auto* d = atoms()) {
      for (std::size_t i = 0; i < d->atoms.size(); ++i)
        if (d->atoms[i].value == v) return pd_[i];
    }
    return 0.0;
  }

  // F((a, b])
  double mass(double a, double b) const { return b <= a ? 0.0 : cdf(b) - cdf(a); }

  double mean() const {
    if (const auto* d = atoms()) {
      double s = 0.0;
      for (std::size_t i = 0; i < d->atoms.size(); ++i) s += pd_[i] * d->atoms[i].value;
      return s;
    }
    if (const auto* e = std::get_if<ExponentialJumps>(&v_)) return e->sign / e->rate;
    const auto& un = std::get<UniformJumps>(v_);
    return 0.5 * (un.lo + un.hi);
  }

  bool has_positive_jumps() const {
    if (const auto* d = atoms())
      return std::any_of(d->atoms.begin(), d->atoms.end(), [](const auto& a) { return a.value > 0; });
    if (const auto* e = std::get_if<ExponentialJumps>(&v_)) return e->sign > 0;
    return std::get<UniformJumps>(v_).hi > 0;
  }
  bool has_negative_jumps() const {
    if (const auto* d = atoms())
      return std::any_of(d->atoms.begin(), d->atoms.end(), [](const auto& a) { return a.value < 0; });
    if (const auto* e = std::get_if<ExponentialJumps>(&v_)) return e->sign < 0;
    return std::get<UniformJumps>(v_).lo < 0;
  }

  // Largest jump size in absolute value (infinite for exponential jumps).
  double max_abs() const {
    if (const auto* d = atoms()) {
      double m = 0.0;
      for (const auto& a : d->atoms) m = std::max(m, std::fabs(a.value));
      return m;
    }
    if (std::holds_alternative<ExponentialJumps>(v_)) return std::numeric_limits<double>::infinity();
    const auto& un = std::get<UniformJumps>(v_);
    return std::max(std::fabs(un.lo), std::fabs(un.hi));
  }

  const std::vector<double>& probabilities() const { return pd_; }

 private:
  void prepare() {
    if (const auto* d = atoms()) {
      if (d->atoms.empty()) throw std::invalid_argument("discrete jump law needs at least one atom");
      Rational total = 0;
      pd_.clear();
      cum_.clear();
      double c = 0.0;
      for (const auto& a : d->atoms) {
        if (a.value == 0.0) throw std::invalid_argument("jump law has an atom at 0");
        if (!(a.prob > 0)) throw std::invalid_argument("atom probabilities must be positive");
        total += a.prob;
        pd_.push_back(to_double(a.prob));
        c += pd_.back();
        cum_.push_back(c);
      }
      if (std::fabs(to_double(total) - 1.0) > 1e-12) throw std::invalid_argument("atom probabilities must sum to 1");
      for (std::size_t i = 0; i < d->atoms.size(); ++i)
        for (std::size_t j = i + 1; j < d->atoms.size(); ++j)
          if (d->atoms[i].value == d->atoms[j].value) throw std::invalid_argument("duplicate atom value");
    } else if (const auto* e = std::get_if<ExponentialJumps>(&v_)) {
      if (!(e->rate > 0)) throw std::invalid_argument("exponential jump rate must be positive");
      if (e->sign != 1 && e->sign != -1) throw std::invalid_argument("exponential jump sign must be +1 or -1");
    } else {
      const auto& un = std::get<UniformJumps>(v_);
      if (!(un.lo < un.hi)) throw std::invalid_argument("uniform jumps need lo < hi");
      if (un.lo <= 0.0 && un.hi >= 0.0) throw std::invalid_argument("uniform jump support must exclude 0");
    }
  }

  Variant v_;
  std::vector<double> pd_;
  std::vector<double> cum_;
};

inline JumpLaw discrete_law(std::vector<std::pair<double, Rational>> atoms) {
  DiscreteAtoms d;
  for (auto& [v, p] : atoms) d.atoms.push_back({v, p});
  return JumpLaw(d);
}

// X_t = c t + sum_{k <= N_t} Y_k
struct ProcessSpec {
  double c = 0.0;
  double lambda = 0.0;
  JumpLaw jumps{};

  void validate() const {
    if (!std::isfinite(c) || !std::isfinite(lambda)) throw std::invalid_argument("drift and rate must be finite");
    if (lambda < 0.0) throw std::invalid_argument("jump rate must be nonnegative");
    if (lambda == 0.0 && c == 0.0) throw std::invalid_argument("rate 0 requires nonzero drift");
  }
  bool compound_poisson() const { return c == 0.0 && lambda > 0.0; }
  double mean_increment() const { return c + lambda * jumps.mean(); }
  // Pi_X({v})
  double levy_atom(double v) const { return lambda * jumps.atom_mass(v); }
};

struct BivariateAtom {
  double dt;
  double dx;
  double rate;
};

struct BivariateSubordinatorSpec {
  double dZ = 0.0;
  double dY = 0.0;
  double q = 0.0;
  std::vector<BivariateAtom> atoms;

  void validate() const {
    if (!(dZ >= 0.0) || !(dY >= 0.0) || !(q >= 0.0)) throw std::invalid_argument("drifts and killing must be nonnegative");
    for (const auto& a : atoms) {
      if (!(a.dt >= 0.0) || !(a.dx >= 0.0)) throw std::invalid_argument("subordinator jumps must be nonnegative");
      if (a.dt == 0.0 && a.dx == 0.0) throw std::invalid_argument("subordinator jump at the origin");
      if (!(a.rate > 0.0) || !std::isfinite(a.rate)) throw std::invalid_argument("atom rates must be positive and finite");
    }
  }
  double total_rate() const {
    double r = 0.0;
    for (const auto& a : atoms) r += a.rate;
    return r;
  }
};

// q + dZ a + dY b + sum r_i (1 - exp(-a dt_i - b dx_i))
inline double kappa_biv(const BivariateSubordinatorSpec& s, double a, double b) {
  double k = s.q + s.dZ * a + s.dY * b;
  for (const auto& at : s.atoms) k -= at.rate * std::expm1(-a * at.dt - b * at.dx);
  return k;
}

// right derivative in b: dY + sum r_i dx_i exp(-a dt_i - b dx_i)
inline double kappa_biv_db(const BivariateSubordinatorSpec& s, double a, double b) {
  double k = s.dY;
  for (const auto& at : s.atoms) k += at.rate * at.dx * std::exp(-a * at.dt - b * at.dx);
  return k;
}

struct SkeletonJump {
  double time;
  double size;
};

template <class R>
std::vector<SkeletonJump> sample_skeleton(const ProcessSpec& spec, double horizon, R& rng) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be positive and finite");
  std::vector<SkeletonJump> out;
  if (spec.lambda == 0.0) return out;
  double t = 0.0;
  for (;;) {
    t += rng.exponential(spec.lambda);
    if (t > horizon) break;
    out.push_back({t, spec.jumps.sample(rng)});
  }
  return out;
}

inline double skeleton_value(const ProcessSpec& spec, const std::vector<SkeletonJump>& sk, double t) {
  double x = spec.c * t;
  for (const auto& j : sk) {
    if (j.time > t) break;
    x += j.size;
  }
  return x;
}

namespace fixtures {

inline ProcessSpec P1() {
  return {1.0, 2.0, discrete_law({{1.0, Rational(1, 2)}, {-1.0, Rational(1, 2)}})};
}
inline ProcessSpec P2() { return {1.0, 0.5, JumpLaw(ExponentialJumps{1.0, -1})}; }
inline ProcessSpec P3() {
  return {0.0, 1.0,
          discrete_law({{-2.0, Rational(1, 4)}, {-1.0, Rational(1, 4)}, {1.0, Rational(1, 4)}, {2.0, Rational(1, 4)}})};
}
inline BivariateSubordinatorSpec B1() { return {0.5, 1.0, 0.2, {{1.0, 1.0, 0.3}, {2.0, 0.0, 0.2}, {0.0, 3.0, 0.1}}}; }

}  // namespace fixtures

}  // namespace levyfv
