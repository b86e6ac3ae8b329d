#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <random>

#include "levyfv/parallel.hpp"
#include "levyfv/processes.hpp"
#include "levyfv/stats.hpp"
#include "test_util.hpp"

using namespace levyfv;
using Catch::Approx;

TEST_CASE("parse_rational reads decimals and fractions exactly") {
  CHECK(parse_rational("0.25") == Rational(1, 4));
  CHECK(parse_rational("1/3") == Rational(1, 3));
  CHECK(parse_rational("-1.5e-1") == Rational(-3, 20));
  CHECK(parse_rational("2") == Rational(2));
}

TEST_CASE("jump law validation") {
  CHECK_THROWS_AS(discrete_law({{0.0, Rational(1)}}), std::invalid_argument);
  CHECK_THROWS_AS(discrete_law({{1.0, Rational(1, 2)}, {-1.0, Rational(1, 3)}}), std::invalid_argument);
  CHECK_THROWS_AS(discrete_law({{1.0, Rational(1, 2)}, {1.0, Rational(1, 2)}}), std::invalid_argument);
  CHECK_THROWS_AS(JumpLaw(UniformJumps{-1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(JumpLaw(ExponentialJumps{1.0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(JumpLaw(ExponentialJumps{0.0, 1}), std::invalid_argument);
  CHECK_NOTHROW(JumpLaw(UniformJumps{0.5, 1.0}));
}

TEST_CASE("jump law cdf and atom masses") {
  const auto p3 = fixtures::P3();
  CHECK(p3.jumps.cdf(-2.5) == 0.0);
  CHECK(p3.jumps.cdf(-2.0) == Approx(0.25));
  CHECK(p3.jumps.cdf(0.0) == Approx(0.5));
  CHECK(p3.jumps.cdf(2.0) == Approx(1.0));
  CHECK(p3.jumps.atom_mass(1.0) == Approx(0.25));
  CHECK(p3.jumps.atom_mass(0.5) == 0.0);
  CHECK(p3.jumps.mass(-1.0, 1.0) == Approx(0.25));  // (-1, 1] holds only the atom at 1
  CHECK(p3.levy_atom(-2.0) == Approx(0.25));

  const JumpLaw e(ExponentialJumps{2.0, -1});
  CHECK(e.atom_mass(-0.5) == 0.0);
  CHECK(e.cdf(0.0) == Approx(1.0));
  CHECK(e.cdf(-1.0) == Approx(std::exp(-2.0)));
  const JumpLaw u(UniformJumps{1.0, 3.0});
  CHECK(u.cdf(2.0) == Approx(0.5));
  CHECK(u.atom_mass(2.0) == 0.0);

  // nondecreasing and right-continuous on a fine grid
  for (const JumpLaw* law : {&p3.jumps, &e, &u}) {
    double prev = 0.0;
    for (double x = -4.0; x <= 4.0; x += 0.125) {
      const double f = law->cdf(x);
      CHECK(f >= prev);
      CHECK(law->cdf(x + 1e-12) == Approx(f).margin(1e-9));
      prev = f;
    }
  }
}

TEST_CASE("process classification") {
  CHECK(fixtures::P3().compound_poisson());
  CHECK_FALSE(fixtures::P1().compound_poisson());
  CHECK_FALSE(fixtures::P2().compound_poisson());
  ProcessSpec pure{1.0, 0.0, {}};
  CHECK_NOTHROW(pure.validate());
  CHECK_FALSE(pure.compound_poisson());
  ProcessSpec nothing{0.0, 0.0, {}};
  CHECK_THROWS_AS(nothing.validate(), std::invalid_argument);
  CHECK(fixtures::P1().mean_increment() == Approx(1.0));
  CHECK(fixtures::P2().mean_increment() == Approx(0.5));
}

TEST_CASE("skeleton of a pure drift is empty") {
  ProcessSpec pure{1.0, 0.0, {}};
  Rng rng(1, 2, 3);
  CHECK(sample_skeleton(pure, 10.0, rng).empty());
  CHECK(skeleton_value(pure, {}, 2.5) == 2.5);
}

TEST_CASE("skeleton jump count has Poisson mean") {
  const auto p1 = fixtures::P1();
  const auto res = run_paths(100000, testutil::ctx(domain::skeleton), RunningStats{},
                             [&](Rng& rng, RunningStats& acc, std::uint64_t) {
                               acc.add(static_cast<double>(sample_skeleton(p1, 10.0, rng).size()));
                             });
  CHECK(std::fabs(res.mean() - 20.0) <= 3.0 * res.se());
}

TEST_CASE("skeleton evaluation is exact") {
  const auto p1 = fixtures::P1();
  const std::vector<SkeletonJump> sk{{0.5, 1.0}, {1.25, -1.0}, {2.0, 1.0}};
  CHECK(skeleton_value(p1, sk, 0.4) == 0.4);
  CHECK(skeleton_value(p1, sk, 0.5) == 1.5);
  CHECK(skeleton_value(p1, sk, 1.5) == 1.5);
  CHECK(skeleton_value(p1, sk, 3.0) == 4.0);
}

namespace {

struct Fingerprints {
  std::vector<std::uint64_t> h;
  void merge(const Fingerprints& o) {
    if (h.empty()) h.assign(o.h.size(), 0);
    for (std::size_t i = 0; i < o.h.size(); ++i) h[i] += o.h[i];
  }
};

Fingerprints skeleton_prints(std::uint64_t chunk, unsigned workers) {
  auto ctx = testutil::ctx(domain::skeleton, workers);
  ctx.policy.chunk_size = chunk;
  const auto p1 = fixtures::P1();
  const std::uint64_t n = 10000;
  return run_paths(n, ctx, Fingerprints{std::vector<std::uint64_t>(n, 0)},
                   [&](Rng& rng, Fingerprints& acc, std::uint64_t i) {
                     std::uint64_t f = 0xcbf29ce484222325ULL;
                     for (const auto& j : sample_skeleton(p1, 5.0, rng)) {
                       std::uint64_t b;
                       std::memcpy(&b, &j.time, sizeof b);
                       f = (f ^ b) * 0x100000001b3ULL;
                       std::memcpy(&b, &j.size, sizeof b);
                       f = (f ^ b) * 0x100000001b3ULL;
                     }
                     acc.h[i] = f;
                   });
}

}  // namespace

TEST_CASE("per-path skeletons do not depend on chunking or workers") {
  const auto a = skeleton_prints(10000, 1);
  const auto b = skeleton_prints(1000, 1);
  const auto c = skeleton_prints(777, 3);
  CHECK(a.h == b.h);
  CHECK(a.h == c.h);
}

TEST_CASE("run_paths reductions are bitwise independent of worker count") {
  const auto p2 = fixtures::P2();
  auto go = [&](unsigned w) {
    return run_paths(50000, testutil::ctx(9, w), RunningStats{}, [&](Rng& rng, RunningStats& acc, std::uint64_t) {
      acc.add(skeleton_value(p2, sample_skeleton(p2, 3.0, rng), 3.0));
    });
  };
  const auto r1 = go(1), r4 = go(4);
  CHECK(r1.mean() == r4.mean());
  CHECK(r1.variance() == r4.variance());
}

TEST_CASE("kappa_biv examples") {
  const auto b1 = fixtures::B1();
  CHECK(kappa_biv(b1, 0.0, 0.0) == Approx(0.2));
  CHECK(kappa_biv(b1, 1.0, 0.0) ==
        Approx(0.2 + 0.5 + 0.3 * (1.0 - std::exp(-1.0)) + 0.2 * (1.0 - std::exp(-2.0))));
  const BivariateSubordinatorSpec drift{0.0, 1.0, 0.0, {}};
  CHECK(kappa_biv(drift, 7.0, 3.0) == Approx(3.0));
}

TEST_CASE("kappa_biv agrees with the integral form under a smeared jump measure") {
  // Spread each atom over a small square and integrate numerically; the atom
  // sum must be the limit as the square shrinks.
  const auto b1 = fixtures::B1();
  const double a = 0.7, b = 1.3;
  for (double w : {1e-2, 1e-3}) {
    double integral = b1.q + b1.dZ * a + b1.dY * b;
    const int n = 40;
    for (const auto& at : b1.atoms) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double t = at.dt + w * (i + 0.5) / n, x = at.dx + w * (j + 0.5) / n;
          s += 1.0 - std::exp(-a * t - b * x);
        }
      integral += at.rate * s / (n * n);
    }
    CHECK(integral == Approx(kappa_biv(b1, a, b)).margin(3.0 * w));
  }
}

TEST_CASE("kappa_biv right derivative in b matches a finite difference") {
  const auto b1 = fixtures::B1();
  for (double a : {0.0, 0.5, 2.0})
    for (double b : {0.0, 1.0, 3.0}) {
      const double h = 1e-6;
      const double fd = (kappa_biv(b1, a, b + h) - kappa_biv(b1, a, b)) / h;
      CHECK(kappa_biv_db(b1, a, b) == Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("kappa_biv is positive and monotone on random specs") {
  std::mt19937_64 gen(12345);
  std::uniform_real_distribution<double> U(0.0, 2.0);
  for (int rep = 0; rep < 200; ++rep) {
    BivariateSubordinatorSpec s{U(gen), U(gen), rep % 3 == 0 ? 0.0 : U(gen), {}};
    const int na = static_cast<int>(gen() % 4);
    for (int i = 0; i < na; ++i) s.atoms.push_back({U(gen), U(gen) + 0.01, U(gen) + 0.01});
    s.validate();
    double prev_a = -1.0;
    for (double a : {0.0, 0.1, 0.5, 1.0, 4.0}) {
      const double k = kappa_biv(s, a, 0.3);
      CHECK(k >= prev_a);
      prev_a = k;
      double prev_b = -1.0;
      for (double b : {0.0, 0.2, 1.0, 3.0}) {
        const double kb = kappa_biv(s, a, b);
        CHECK(kb >= prev_b);
        prev_b = kb;
        // positive unless every term of the exponent vanishes at (a, b)
        double any = s.q + s.dZ * a + s.dY * b;
        for (const auto& at : s.atoms) any += at.dt * a + at.dx * b;
        if (any > 0) CHECK(kb > 0.0);
      }
    }
  }
}

TEST_CASE("bivariate spec validation") {
  BivariateSubordinatorSpec s{0.5, 1.0, 0.0, {{0.0, 0.0, 1.0}}};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.atoms = {{1.0, -1.0, 1.0}};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.atoms = {{1.0, 1.0, 0.0}};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK_NOTHROW(fixtures::B1().validate());
  CHECK(fixtures::B1().total_rate() == Approx(0.6));
}
