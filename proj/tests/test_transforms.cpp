#include <catch_amalgamated.hpp>

#include <cmath>

#include "levyfv/transforms.hpp"
#include "test_util.hpp"

using namespace levyfv;
using Catch::Approx;

TEST_CASE("lt_V closed-form cases") {
  const AtomModel drift(BivariateSubordinatorSpec{1.0, 1.0, 0.0, {}});
  const auto a = lt_V(drift, {{2.0, 3.0}}, 50, testutil::ctx(1));
  CHECK(a[0].value == Approx(0.2).epsilon(1e-14));
  CHECK(a[0].se == 0.0);

  const AtomModel killed(BivariateSubordinatorSpec{1.0, 1.0, 0.2, {}});
  const auto b = lt_V(killed, {{0.0, 0.0}}, 200000, testutil::ctx(2));
  CHECK(std::fabs(b[0].value - 5.0) <= 3.0 * b[0].se);

  CHECK_THROWS_AS(lt_V(drift, {{0.0, 0.0}}, 10, testutil::ctx(3)), std::invalid_argument);
  CHECK_THROWS_AS(lt_V(drift, {{-1.0, 1.0}}, 10, testutil::ctx(3)), std::invalid_argument);
}

TEST_CASE("lt_V on B1 inverts kappa") {
  const auto b1 = fixtures::B1();
  const auto e = lt_V(AtomModel(b1), {{1.0, 1.0}}, 200000, testutil::ctx(4));
  CHECK(std::fabs(e[0].value - 1.0 / kappa_biv(b1, 1.0, 1.0)) <= 3.0 * e[0].se);
}

TEST_CASE("lt_V times kappa is one on a grid") {
  std::vector<std::pair<double, double>> ab;
  for (double a : {0.0, 0.5, 1.0, 2.0})
    for (double b : {0.0, 0.5, 1.0, 2.0}) ab.emplace_back(a, b);
  const auto reps = check_lt_V(fixtures::B1(), ab, 100000, testutil::ctx(5));
  CHECK(reps.size() == ab.size());  // B1 has killing so (0, 0) is kept
  for (const auto& r : reps) {
    INFO(r.params << " lhs " << r.lhs << " se " << r.se_lhs);
    CHECK(r.pass);
  }
  // without killing (0, 0) is dropped
  BivariateSubordinatorSpec s = fixtures::B1();
  s.q = 0.0;
  CHECK(check_lt_V(s, ab, 1000, testutil::ctx(6)).size() == ab.size() - 1);
}

TEST_CASE("slfi rhs is invariant under swapping mu + ell and rho") {
  const auto b1 = fixtures::B1();
  TransformParams p{1.0, 3.0, 0.5, 0.75, 1.25};
  TransformParams q{1.0, 1.5, 2.0, 0.75, 1.25};
  CHECK(slfi_rhs(b1, p) == slfi_rhs(b1, q));
  const BivariateSubordinatorSpec drift{0.5, 2.0, 0.25, {}};
  CHECK(slfi_rhs(drift, p) == slfi_rhs(drift, q));
}

TEST_CASE("derivative branch is the limit of the generic branch") {
  const auto b1 = fixtures::B1();
  TransformParams d{1.0, 2.0, 1.0, 0.5, 0.7};
  const double target = slfi_rhs(b1, d, SlfiBranch::derivative);
  // closed form: d_Y + sum r_i dx_i exp(-theta dt_i - rho dx_i), over kappa(nu, mu)
  double num = b1.dY;
  for (const auto& at : b1.atoms) num += at.rate * at.dx * std::exp(-d.theta * at.dt - d.rho * at.dx);
  CHECK(target == Approx(num / kappa_biv(b1, d.nu, d.mu)).epsilon(1e-14));

  std::vector<double> g;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    TransformParams p = d;
    p.ell += eps;
    g.push_back(slfi_rhs(b1, p, SlfiBranch::generic));
  }
  CHECK(std::fabs(g[2] - target) < std::fabs(g[1] - target));
  CHECK(std::fabs(g[1] - target) < std::fabs(g[0] - target));
  // first-order error in eps: one Richardson step removes it
  const double rich = (10.0 * g[2] - g[1]) / 9.0;
  CHECK(rich == Approx(target).epsilon(1e-7));
}

TEST_CASE("branch validation") {
  TransformParams d{1.0, 2.0, 1.0, 1.0, 1.0};
  try {
    validate_branch(d, SlfiBranch::generic);
    FAIL("expected a throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("use the derivative branch") != std::string::npos);
  }
  TransformParams g{1.0, 2.0, 0.0, 1.0, 1.0};
  CHECK_THROWS_AS(validate_branch(g, SlfiBranch::derivative), std::invalid_argument);
  CHECK_NOTHROW(validate_branch(g, SlfiBranch::automatic));
  CHECK_NOTHROW(validate_branch(d, SlfiBranch::automatic));
  CHECK_THROWS_AS(exp_weight_nodes(0.0, 10), std::invalid_argument);
}

TEST_CASE("slfi on pure drifts matches the hand-integrated value") {
  // Y creeps over u at time u/dY: the integrand is exp(-(nu dZ + q) u / dY)
  const BivariateSubordinatorSpec s{0.5, 2.0, 0.0, {}};
  const TransformParams p{1.0, 2.0, 0.0, 1.0, 1.0};
  const double closed = 1.0 / (p.mu + (p.nu * s.dZ + s.q) / s.dY);
  const auto r = slfi_check(s, p, 20, testutil::ctx(7));
  CHECK(r.rhs == Approx(closed).epsilon(1e-14));
  CHECK(r.se_lhs == 0.0);
  CHECK(r.lhs == Approx(closed).epsilon(1e-3));
  CHECK(r.pass);

  const BivariateSubordinatorSpec k{0.5, 2.0, 0.3, {}};
  const auto rk = slfi_check(k, p, 100000, testutil::ctx(8));
  CHECK(rk.rhs == Approx(1.0 / (p.mu + (p.nu * k.dZ + k.q) / k.dY)).epsilon(1e-14));
  CHECK(rk.pass);
}

TEST_CASE("slfi identity on B1") {
  const auto b1 = fixtures::B1();
  SECTION("generic branch, second factorisation case") {
    const auto r = slfi_check(b1, {1.0, 2.0, 0.0, 0.5, 0.5}, 100000, testutil::ctx(9));
    INFO(r.lhs << " vs " << r.rhs << " " << r.note);
    CHECK(r.pass);
  }
  SECTION("derivative branch") {
    SlfiOptions o;
    o.branch = SlfiBranch::derivative;
    const auto r = slfi_check(b1, {1.0, 2.0, 1.0, 0.5, 0.7}, 100000, testutil::ctx(10), o);
    INFO(r.lhs << " vs " << r.rhs << " " << r.note);
    CHECK(r.pass);
    CHECK(r.note.rfind("derivative", 0) == 0);
  }
}

TEST_CASE("ladder kappa estimates are positive and monotone") {
  const auto p2 = fixtures::P2();
  std::vector<std::pair<double, double>> pts;
  const std::vector<double> grid{0.25, 0.5, 1.0, 2.0};
  for (double a : grid)
    for (double b : grid) pts.emplace_back(a, b);
  const auto k = estimate_ladder_kappa(p2, pts, {}, 20000, testutil::ctx(11), 1e4);
  CHECK(k.censored == 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double v = k.value[i * grid.size() + j];
      CHECK(v > 0.0);
      if (i > 0) CHECK(v >= k.value[(i - 1) * grid.size() + j]);
      if (j > 0) CHECK(v >= k.value[i * grid.size() + j - 1]);
    }
}

TEST_CASE("slfi identity at path level on P2") {
  const auto p2 = fixtures::P2();
  SECTION("generic") {
    const auto r = slfi_fluct_check(p2, {1.0, 2.0, 0.0, 0.5, 0.5}, 50000, 200000, testutil::ctx(12));
    INFO(r.lhs << " vs " << r.rhs << " " << r.note);
    CHECK(r.pass);
  }
  SECTION("derivative") {
    FluctOptions o;
    o.branch = SlfiBranch::derivative;
    const auto r = slfi_fluct_check(p2, {1.0, 2.0, 1.0, 0.5, 0.7}, 50000, 200000, testutil::ctx(13), o);
    INFO(r.lhs << " vs " << r.rhs << " " << r.note);
    CHECK(r.pass);
  }
  CHECK_THROWS_AS(slfi_fluct_check(fixtures::P3(), {}, 10, 10, testutil::ctx(14)), std::invalid_argument);
}

TEST_CASE("Wiener-Hopf normalisation on P3") {
  for (double a : {0.5, 1.0, 2.0}) {
    const auto e = kappahat_exact(fixtures::P3(), a);
    CHECK(e.value > 0.0);
    CHECK(e.bound < 1e-10);
  }
  const auto reps = wiener_hopf_check(fixtures::P3(), {0.5, 1.0, 2.0}, 100000, testutil::ctx(15));
  REQUIRE(reps.size() == 3);
  for (const auto& r : reps) {
    INFO(r.params << " " << r.lhs << " " << r.note);
    CHECK(r.pass);
  }
  CHECK_THROWS_AS(wiener_hopf_check(fixtures::P3(), {0.0}, 10, testutil::ctx(16)), std::invalid_argument);
}

TEST_CASE("Wiener-Hopf product shrinks as a goes to zero") {
  const auto reps = wiener_hopf_check(fixtures::P3(), {0.02}, 20000, testutil::ctx(17));
  CHECK(reps[0].lhs < 0.05);
}

TEST_CASE("resolvent creeping identity") {
  SECTION("no jumps") {
    const ProcessSpec s{2.0, 0.0, {}};
    const auto r = check_resolvent_creep(s, 1.0, 1.0, 0.001, 100, testutil::ctx(18));
    CHECK(r.lhs == Approx(std::exp(-0.5)).epsilon(1e-14));
    CHECK(r.rhs == Approx(std::exp(-0.5)).epsilon(1e-3));
    CHECK(r.pass);
  }
  SECTION("exponential jumps") {
    const ProcessSpec s{1.0, 1.0, JumpLaw(ExponentialJumps{1.0, 1})};
    const auto r = check_resolvent_creep(s, 1.0, 0.5, 0.005, 200000, testutil::ctx(19));
    INFO(r.lhs << " vs " << r.rhs << " " << r.note);
    CHECK(r.pass);
  }
  SECTION("preconditions") {
    const ProcessSpec s{1.0, 1.0, JumpLaw(ExponentialJumps{1.0, 1})};
    CHECK_THROWS_AS(check_resolvent_creep(s, 1.0, 0.005, 0.005, 10, testutil::ctx(20)), std::invalid_argument);
    CHECK_THROWS_AS(check_resolvent_creep(s, 0.0, 0.5, 0.005, 10, testutil::ctx(20)), std::invalid_argument);
    CHECK_THROWS_AS(check_resolvent_creep(fixtures::P1(), 1.0, 0.5, 0.005, 10, testutil::ctx(20)),
                    std::invalid_argument);
  }
}
