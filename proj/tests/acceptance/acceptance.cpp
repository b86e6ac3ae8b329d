#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "levyfv/cli.hpp"
#include "levyfv/lawcheck.hpp"
#include "levyfv/renewal.hpp"
#include "levyfv/rw_ladder.hpp"
#include "levyfv/transforms.hpp"

using namespace levyfv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
  void report(const CheckReport& r, const std::string& label) {
    std::ostringstream os;
    os << label << ' ' << r.check << " lhs=" << fmt(r.lhs) << " rhs=" << fmt(r.rhs) << " dist=" << fmt(r.distance)
       << " budget=" << fmt(r.budget);
    require(r.pass, os.str());
  }
};

McContext g_base;

McContext ctx(std::uint64_t domain) { return g_base.with_domain(domain); }

std::string num(double x) { return fmt(x); }

// ---------------------------------------------------------------------------
// A1: ladder tables against brute-force enumeration

struct Enum {
  std::vector<std::vector<Rational>> up, dn;  // point masses by (epoch, height)
};

Enum enumerate_paths(const LatticeWalkSpec& w, std::size_t K) {
  const std::size_t J = static_cast<std::size_t>(w.m()) * K;
  Enum e;
  e.up.assign(K + 1, std::vector<Rational>(J + 1));
  e.dn.assign(K + 1, std::vector<Rational>(J + 1));
  e.up[0][0] = 1;
  e.dn[0][0] = 1;
  std::vector<std::size_t> d(K, 0);
  for (;;) {
    Rational p = 1;
    for (std::size_t k = 0; k < K; ++k) p *= w.steps[d[k]].second;
    long s = 0, hi = 0, lo = 0;
    for (std::size_t k = 1; k <= K; ++k) {
      s += w.steps[d[k - 1]].first;
      if (s >= hi) {  // weak ascending
        hi = s;
        e.up[k][static_cast<std::size_t>(s)] += p;
      }
      if (s < lo) {  // strict descending
        lo = s;
        e.dn[k][static_cast<std::size_t>(-s)] += p;
      }
    }
    std::size_t i = 0;
    while (i < K && ++d[i] == w.steps.size()) d[i++] = 0;
    if (i == K) break;
  }
  return e;
}

Outcome a1() {
  Outcome o;
  auto walk = [](std::vector<std::pair<long, Rational>> st) {
    LatticeWalkSpec w;
    w.steps = std::move(st);
    return w;
  };
  const std::vector<std::pair<std::string, LatticeWalkSpec>> walks{
      {"pm1", walk({{-1, Rational(1, 2)}, {1, Rational(1, 2)}})},
      {"skew", walk({{-1, Rational(2, 3)}, {2, Rational(1, 3)}})},
      {"three", walk({{-2, Rational(1, 4)}, {1, Rational(1, 2)}, {3, Rational(1, 4)}})},
      {"P3", LatticeWalkSpec::from_process(fixtures::P3())}};
  for (const auto& [name, w] : walks) {
    std::size_t mism = 0, cells = 0;
    for (std::size_t K = 0; K <= 8; ++K) {
      const auto tab = renewal_tables(w, K);
      const auto e = enumerate_paths(w, K);
      for (std::size_t k = 0; k <= K; ++k) {
        Rational cu = 0, cd = 0;
        for (std::size_t j = 0; j <= tab.J; ++j) {
          cu += e.up[k][j];
          cd += e.dn[k][j];
          ++cells;
          if (tab.U_exact[k][j] != cu || tab.Uhat_exact[k][j] != cd) ++mism;
        }
      }
    }
    o.require(mism == 0, name + " K<=8 " + std::to_string(cells) + " cells, mismatches " + std::to_string(mism));
  }
  return o;
}

// ---------------------------------------------------------------------------

Outcome a2() {
  Outcome o;
  const auto p3 = fixtures::P3();
  const std::vector<double> ts{0.5, 1, 2}, xs{0, 1, 2, 3};
  const auto walk = LatticeWalkSpec::from_process(p3);
  const std::size_t K = choose_truncation(p3.lambda, ts.back());
  const auto tab = renewal_tables_long(walk, K, 4);
  const auto ev = exact_V_grid(tab, p3.lambda, ts, xs, false), evh = exact_V_grid(tab, p3.lambda, ts, xs, true);
  const auto mv = estimate_V(LadderModel(p3, 1e4), ts, xs, 100000, ctx(201));
  const auto mvh = estimate_Vhat(p3, ts, xs, 100000, ctx(202));
  double worst = -kInf, worst_h = -kInf;
  for (std::size_t k = 0; k < ev.V.size(); ++k) {
    worst = std::max(worst, std::fabs(mv.V[k].value - ev.V[k].value) - 3.0 * mv.V[k].se - ev.V[k].se);
    worst_h = std::max(worst_h, std::fabs(mvh.V[k].value - evh.V[k].value) - 3.0 * mvh.V[k].se - evh.V[k].se);
  }
  o.require(worst <= 0.0, "V 12 cells, max(|diff| - budget) = " + num(worst));
  o.require(worst_h <= 0.0, "Vhat 12 cells, max(|diff| - budget) = " + num(worst_h));
  return o;
}

Outcome a3() {
  Outcome o;
  const auto p1 = fixtures::P1();
  const std::vector<std::pair<double, double>> pts{{0.5, 0.25}, {0.5, 0.45}, {0.8, 1.2}};
  for (std::size_t i = 0; i < pts.size(); ++i)
    o.report(check_ct1(p1, pts[i].first, pts[i].second, 0.005, 1000000, ctx(300 + i)),
             "(" + num(pts[i].first) + "," + num(pts[i].second) + ")");
  const auto z = estimate_p(p1, 0.3, 1.5, 1000000, ctx(310));
  o.require(z.value == 0.0, "p(0.3,1.5) = " + num(z.value));
  const auto lb = estimate_p(p1, 0.5, 0.25, 1000000, ctx(311));
  o.require(lb.value >= std::exp(-0.5) - 3.0 * lb.se, "p(0.5,0.25) = " + num(lb.value) + " >= exp(-1/2) - 3SE");
  return o;
}

Outcome a4() {
  Outcome o;
  for (double u : {0.4, 0.9}) {
    o.report(check_subpint(fixtures::P1(), 0.5, u, 100000, ctx(400 + static_cast<std::uint64_t>(u * 10))),
             "P1 u=" + num(u));
    o.report(check_subpint(fixtures::B1(), 0.5, u, 100000, ctx(420 + static_cast<std::uint64_t>(u * 10))),
             "B1 u=" + num(u));
  }
  return o;
}

std::vector<Axis> p3_quintuple_axes() {
  const auto& te = cli::default_time_edges();
  return {Axis::lattice(2), Axis::lattice(2), Axis::lattice(2), Axis(te), Axis(te)};
}

std::vector<Axis> p1_quintuple_axes() {
  return {Axis({0, 1}), Axis({0, 0.3, 0.6, 1}), Axis({0, 0.2, 0.35, 0.5}), Axis({0, 0.25, 0.5, 1, 2, 50}),
          Axis({0, 0.25, 0.5, 1, 2, 50})};
}

Outcome a5(Monitors* mon = nullptr) {
  Outcome o;
  o.report(check_quintuple_lattice(fixtures::P3(), 2.0, p3_quintuple_axes(), 1000000, ctx(500), {}, mon), "P3 u=2");
  QuintupleOptions opt;
  opt.tv_budget = 0.03;
  for (const auto& r : check_quintuple_drift(fixtures::P1(), 0.5, p1_quintuple_axes(), 1000000, ctx(501), opt, mon))
    o.report(r, "P1 u=0.5");
  return o;
}

Outcome a6(Monitors* mon = nullptr) {
  Outcome o;
  const Axis y({0, 0.25, 0.5, 0.75, 1, 1.25, 1.5});
  const Axis t({0, 0.25, 0.5, 0.75, 1, 1.5, 2, 3, 5, 1e6});
  o.report(check_quadruple(fixtures::B1(), 1.5, y, t, 1000000, ctx(600), {}, mon), "B1 u=1.5");
  return o;
}

Outcome a7() {
  Outcome o;
  {
    const Axis s(cli::default_time_edges());
    const auto a = amicale(fixtures::P3(), s, Axis::lattice(2), 1000000, ctx(700));
    const auto reps = amicale_reports(a, s, Axis::lattice(2), 1000000);
    o.report(reps[0], "P3");
  }
  {
    const auto p2 = fixtures::P2();
    const Axis s({0, 1, 3, 10, 50});
    const auto a = amicale(p2, s, Axis({0, 0.25, 0.5, 0.75, 1}), 1000000, ctx(701));
    o.require(std::fabs(a.lhs_x0_all.value - p2.lambda) <= 3.0 * a.lhs_x0_all.se,
              "P2 Pi(.,{0}) total " + num(a.lhs_x0_all.value) + " vs lambda " + num(p2.lambda) + " (SE " +
                  num(a.lhs_x0_all.se) + ")");
    o.require(a.rhs_x0.value == 0.0, "P2 RHS {0}-fibre mass " + num(a.rhs_x0.value));
  }
  {
    const auto reps = check_amicale(fixtures::P1(), Axis({0, 1, 3, 10, 50}), Axis({0, 0.25, 0.5, 0.75, 1}), 1000000,
                                    ctx(702));
    o.report(reps[0], "P1");
  }
  return o;
}

Outcome a8(Monitors* mon = nullptr) {
  Outcome o;
  SlfiOptions g;
  g.nodes = 40;
  o.report(slfi_check(fixtures::B1(), {1, 2, 0, 1, 1}, 100000, ctx(800), g, mon), "(1,2,0,1,1)");
  SlfiOptions d = g;
  d.branch = SlfiBranch::derivative;
  o.report(slfi_check(fixtures::B1(), {1, 2, 1, 0.5, 0.5}, 100000, ctx(801), d, mon), "(1,2,1,0.5,0.5)");
  return o;
}

Outcome a9() {
  Outcome o;
  const auto r = slfi_fluct_check(fixtures::P2(), {1, 2, 0, 1, 1}, 200000, 800000, ctx(900));
  o.report(r, "P2 (1,2,0,1,1)");
  o.detail += " [" + r.note + "]";
  return o;
}

Outcome a10() {
  Outcome o;
  for (const auto& r : wiener_hopf_check(fixtures::P3(), {0.5, 1, 2}, 1000000, ctx(1000))) o.report(r, r.params);
  return o;
}

Outcome a11() {
  Outcome o;
  std::vector<std::pair<double, double>> ab;
  for (double a : {0.0, 0.5, 1.0, 2.0})
    for (double b : {0.0, 0.5, 1.0, 2.0}) ab.emplace_back(a, b);
  std::size_t fails = 0;
  const auto reps = check_lt_V(fixtures::B1(), ab, 1000000, ctx(1100));
  double worst = 0.0;
  for (const auto& r : reps) {
    if (!r.pass) ++fails;
    worst = std::max(worst, r.distance / std::max(r.budget, 1e-300));
  }
  o.require(fails == 0, std::to_string(reps.size()) + " grid points, worst distance/budget " + num(worst));
  return o;
}

Outcome a12() {
  Outcome o;
  Monitors mon;
  // passage suites
  a5(&mon);
  a6(&mon);
  a8(&mon);
  // extra first-passage batches on creeping and non-creeping fixtures
  const ProcessSpec s1{1.0, 1.0, JumpLaw(ExponentialJumps{2.0, -1})};
  const std::vector<std::pair<std::string, ProcessSpec>> extra{{"P1", fixtures::P1()}, {"P2", fixtures::P2()},
                                                               {"S", s1}};
  std::uint64_t dom = 1200;
  for (const auto& [name, spec] : extra) {
    auto m = run_paths(1000000, ctx(dom++), Monitors{}, [&](Rng& rng, Monitors& acc, std::uint64_t) {
      thread_local std::vector<PassageRecord> recs;
      first_passage_levels(spec, {0.3, 0.5, 1.0, 2.5}, 1e4, rng, recs);
      ++acc.paths;
      for (const auto& r : recs) acc.observe(r);
    });
    mon.merge(m);
  }
  o.require(mon.paths >= 5000000, "paths " + std::to_string(mon.paths));
  o.require(mon.creep_from_below == 0, "creep with X(tau-) < u: " + std::to_string(mon.creep_from_below));
  o.require(mon.dz_without_dy == 0, "dZ > 0 with dY = 0 at passage: " + std::to_string(mon.dz_without_dy));
  return o;
}

Outcome a13() {
  Outcome o;
  o.report(check_alpha(fixtures::P3(), Axis::lattice(2), Axis::lattice(2),
                       Axis({0, 0.5, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000}), 1000000, ctx(1300)),
           "P3");
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome a14() {
  Outcome o;
  const auto root = fs::temp_directory_path() / "levyfv_acceptance_a14";
  fs::remove_all(root);
  const std::string cfg = std::string(LEVYFV_SOURCE_DIR) + "/configs/quick.json";
  std::vector<fs::path> dirs;
  for (unsigned w : {1u, 4u}) {
    const auto d = root / ("w" + std::to_string(w));
    const std::string cmd = std::string(LEVYFV_CLI_BINARY) + " --config " + cfg + " --seed 99 --workers " +
                            std::to_string(w) + " --out " + d.string() + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    o.require(WIFEXITED(st) && WEXITSTATUS(st) == 0, "run with --workers " + std::to_string(w));
    dirs.push_back(d);
  }
  std::size_t files = 0, diff = 0;
  for (const auto& e : fs::directory_iterator(dirs[0])) {
    if (e.path().extension() != ".csv") continue;
    ++files;
    if (slurp(e.path()) != slurp(dirs[1] / e.path().filename())) ++diff;
  }
  o.require(files > 0 && diff == 0, std::to_string(files) + " CSV files compared, " + std::to_string(diff) + " differ");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria A1-A14"};
  std::vector<std::string> only;
  std::uint64_t seed = 20261016;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--only", only, "run only these criteria, e.g. A3");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--workers", workers, "worker threads");
  CLI11_PARSE(app, argc, argv);
  g_base.policy.seed = seed;
  g_base.workers = workers;

  const std::vector<std::pair<std::string, std::function<Outcome()>>> all{
      {"A1", a1},   {"A2", a2},   {"A3", a3},   {"A4", a4},   {"A5", [] { return a5(); }},
      {"A6", [] { return a6(); }}, {"A7", a7}, {"A8", [] { return a8(); }}, {"A9", a9},   {"A10", a10},
      {"A11", a11}, {"A12", a12}, {"A13", a13}, {"A14", a14}};
  for (const auto& k : only)
    if (std::none_of(all.begin(), all.end(), [&](const auto& c) { return c.first == k; })) {
      std::cerr << "unknown criterion " << k << '\n';
      return 2;
    }
  int failed = 0;
  for (const auto& [name, fn] : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << name << ' ' << (r.pass ? "PASS" : "FAIL") << "  " << r.detail << "  (" << fmt(secs) << " s)"
              << std::endl;
    if (!r.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
