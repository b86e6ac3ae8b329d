#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "levyfv/cli.hpp"

using namespace levyfv;
using namespace levyfv::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("levyfv_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string config_error_path(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.path;
  }
  return "<none>";
}

json ct1_config() {
  return json::parse(R"({"seed": 42, "N": 100000, "fixtures": ["P1"],
                         "checks": [{"check": "ct1", "fixture": "P1", "t": 0.5, "u": 0.25}]})");
}

RunResult run_quiet(const ExperimentConfig& cfg, std::uint64_t seed, unsigned workers, const fs::path& out) {
  std::ostringstream log;
  return run(cfg, RunOptions{seed, workers, out.string()}, log);
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(ct1_config());
  CHECK(cfg.seed == 42);
  CHECK(cfg.N == 100000);
  CHECK(cfg.chunk_size == 4096);
  REQUIRE(cfg.checks.size() == 1);
  CHECK(cfg.checks[0].check == "ct1");
  CHECK(cfg.fixtures.count("P1") == 1);
}

TEST_CASE("custom fixtures") {
  const auto cfg = parse_config(json::parse(R"({
    "fixtures": [
      {"name": "W", "kind": "levy", "drift": 0.5, "rate": 2,
       "jumps": {"type": "discrete", "atoms": [[1, "1/3"], [-0.5, "2/3"]]}},
      {"name": "U", "kind": "levy", "drift": 1, "rate": 1, "jumps": {"type": "uniform", "lo": 0.5, "hi": 1}},
      {"name": "S", "kind": "subordinator", "dZ": 0.5, "dY": 1, "q": 0.1, "atoms": [[1, 1, 0.3]]}
    ],
    "checks": []})"));
  const auto& w = std::get<ProcessSpec>(cfg.fixtures.at("W"));
  CHECK(w.c == 0.5);
  CHECK(w.jumps.atom_mass(1.0) == Catch::Approx(1.0 / 3.0));
  CHECK(std::holds_alternative<ProcessSpec>(cfg.fixtures.at("U")));
  const auto& s = std::get<BivariateSubordinatorSpec>(cfg.fixtures.at("S"));
  CHECK(s.q == 0.1);
  REQUIRE(s.atoms.size() == 1);
  CHECK(s.atoms[0].rate == 0.3);
}

TEST_CASE("config errors name the offending key") {
  auto j = ct1_config();
  j["checks"][0]["tt"] = 1;
  CHECK(config_error_path(j) == "checks[0].tt");

  j = ct1_config();
  j["bogus"] = 1;
  CHECK(config_error_path(j) == "config.bogus");

  j = ct1_config();
  j["checks"][0]["fixture"] = "P9";
  CHECK(config_error_path(j) == "checks[0].fixture");

  j = ct1_config();
  j["checks"][0]["check"] = "nope";
  CHECK(config_error_path(j) == "checks[0].check");

  j = ct1_config();
  j["fixtures"] = json::array({json{{"name", "X"}, {"kind", "levy"}, {"drift", 1}, {"rate", 1},
                                    {"jumps", {{"type", "discrete"}, {"atoms", {{1, 0.5}, {2, 0.25}}}}}}});
  j["checks"] = json::array();
  CHECK(config_error_path(j).rfind("fixtures[0]", 0) == 0);
}

TEST_CASE("preconditions are validated before dispatch") {
  SECTION("generic slfi branch at ell = rho - mu") {
    const auto cfg = parse_config(json::parse(R"({"fixtures": ["B1"], "checks": [
      {"check": "slfi", "fixture": "B1", "mu": 1, "rho": 2, "ell": 1, "nu": 1, "theta": 1, "branch": "generic"}]})"));
    try {
      run_quiet(cfg, 1, 1, scratch("slfi_branch"));
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(e.path == "checks[0].branch");
      CHECK(std::string(e.what()).find("use the derivative branch") != std::string::npos);
    }
  }
  SECTION("levy check on a subordinator fixture") {
    const auto cfg = parse_config(json::parse(R"({"fixtures": ["B1"], "checks": [
      {"check": "ct1", "fixture": "B1", "t": 1, "u": 1}]})"));
    CHECK_THROWS_AS(run_quiet(cfg, 1, 1, scratch("wrong_kind")), ConfigError);
  }
  SECTION("nothing is written when a later check is invalid") {
    const auto cfg = parse_config(json::parse(R"({"fixtures": ["P1", "B1"], "checks": [
      {"check": "ct1", "fixture": "P1", "t": 1, "u": 0.5, "N": 100},
      {"check": "resolvent", "fixture": "P1", "q": 1, "u": 0.5}]})"));
    const auto dir = scratch("late_invalid");
    CHECK_THROWS_AS(run_quiet(cfg, 1, 1, dir / "out"), ConfigError);
    CHECK_FALSE(fs::exists(dir / "out" / "summary.csv"));
  }
}

TEST_CASE("ct1 run passes and reruns are byte-identical") {
  const auto cfg = parse_config(ct1_config());
  const auto a = scratch("ct1_a"), b = scratch("ct1_b");
  const auto ra = run_quiet(cfg, 42, 1, a);
  const auto rb = run_quiet(cfg, 42, 3, b);
  REQUIRE(ra.reports.size() == 1);
  CHECK(ra.reports[0].pass);
  CHECK(ra.exit_status == 0);
  for (const char* f : {"summary.csv", "reports.csv", "summary.txt"}) {
    INFO(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto s = slurp(a / "summary.csv");
  CHECK(s.rfind("check,fixture,params_hash,lhs,rhs,distance,budget,pass\n", 0) == 0);
  CHECK(s.find(",PASS\n") != std::string::npos);

  const auto c = scratch("ct1_c");
  run_quiet(cfg, 43, 1, c);
  CHECK(slurp(a / "summary.csv") != slurp(c / "summary.csv"));
}

TEST_CASE("exit status depends only on the FAIL rows") {
  std::vector<CheckReport> reps(3);
  for (auto& r : reps) r.pass = true;
  CHECK(exit_status(reps) == 0);
  reps[1].pass = false;
  CHECK(exit_status(reps) != 0);
  std::swap(reps[0], reps[1]);
  CHECK(exit_status(reps) != 0);
  CHECK(exit_status({}) == 0);
}

TEST_CASE("plot data") {
  const auto cfg = parse_config(json::parse(R"({"N": 5000, "fixtures": ["P1", "P3"], "checks": [
    {"check": "p-estimate", "fixture": "P1", "t": [0.3, 0.5], "u": [0.2, 1.1, 1.3, 1.5, 2.0, 2.4]},
    {"check": "V-grid", "fixture": "P3", "t": [1, 2], "u": [1, 2, 3]}]})"));
  const auto dir = scratch("plot");
  run_quiet(cfg, 5, 1, dir);
  const auto files = report_plotdata(dir.string());
  REQUIRE(files.size() == 2);
  const auto first = slurp(dir / "plot_p_vs_u.csv");
  CHECK(first.rfind("figure,series,x,y,se\n", 0) == 0);
  report_plotdata(dir.string());
  CHECK(slurp(dir / "plot_p_vs_u.csv") == first);

  // p(t, u) = 0 on (n + t, n + 1]: no creeping path reaches those levels at time t
  std::istringstream in(first);
  std::string line;
  std::getline(in, line);
  int zeros = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    REQUIRE(f.size() == 5);
    const double t = std::stod(f[1].substr(2)), u = std::stod(f[2]), y = std::stod(f[3]);
    const double frac = u - std::floor(u);
    if (frac < 1e-9 || frac > t + 1e-9) {
      CHECK(y == 0.0);
      CHECK(std::stod(f[4]) == 0.0);
      ++zeros;
    }
  }
  CHECK(zeros >= 4);

  CHECK_THROWS(report_plotdata(scratch("plot_empty").string()));
  CHECK_THROWS(report_plotdata((dir / "missing").string()));
}

TEST_CASE("full suite yields at least twelve rows") {
  std::ifstream in(std::string(LEVYFV_SOURCE_DIR) + "/configs/full_suite.json");
  auto j = json::parse(in);
  j["N"] = 2000;
  const auto cfg = parse_config(j);
  const auto dir = scratch("full");
  const auto r = run_quiet(cfg, 3, 1, dir);
  CHECK(r.reports.size() >= 12);
  const auto s = slurp(dir / "summary.csv");
  CHECK(std::count(s.begin(), s.end(), '\n') == static_cast<long>(r.reports.size()) + 1);
  for (const auto& name : check_names()) {
    if (name == "resolvent") continue;  // needs a subordinator levy fixture
    INFO(name);
    CHECK(std::any_of(r.reports.begin(), r.reports.end(),
                      [&](const CheckReport& x) { return x.check.rfind(name, 0) == 0; }));
  }
}

TEST_CASE("binary exit codes") {
  const auto dir = scratch("binary");
  {
    std::ofstream bad(dir / "bad.json");
    bad << R"({"seed": 1, "checks": [{"check": "ct1", "fixture": "P1", "t": 1, "u": 1, "oops": 2}], "fixtures": ["P1"]})";
  }
  const std::string bin = LEVYFV_CLI_BINARY;
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(status(bin + " --config " + (dir / "bad.json").string()) == 2);
  CHECK(status(bin) == 2);
  CHECK(status(bin + " plotdata " + (dir / "nothing").string()) == 2);
  {
    std::ofstream good(dir / "good.json");
    good << R"({"N": 1000, "fixtures": ["P1"], "checks": [{"check": "ct1", "fixture": "P1", "t": 0.5, "u": 0.25}]})";
  }
  CHECK(status(bin + " --config " + (dir / "good.json").string() + " --workers 2 --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "summary.csv"));
}
