#pragma once

#include <cmath>
#include <deque>
#include <stdexcept>

#include "levyfv/parallel.hpp"

namespace testutil {

// Replays a fixed list of uniforms; gap(g, rate) encodes an exponential gap.
struct ScriptedRng {
  std::deque<double> u;

  double uniform() {
    if (u.empty()) throw std::runtime_error("script exhausted");
    const double x = u.front();
    u.pop_front();
    return x;
  }
  double exponential(double rate) {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log1p(-uniform()) / rate;
  }
  ScriptedRng& gap(double g, double rate) {
    u.push_back(-std::expm1(-rate * g));
    return *this;
  }
  ScriptedRng& pick(double x) {
    u.push_back(x);
    return *this;
  }
};

inline levyfv::McContext ctx(std::uint64_t domain, unsigned workers = 1, std::uint64_t seed = 20261016) {
  levyfv::McContext c;
  c.policy.seed = seed;
  c.domain = domain;
  c.workers = workers;
  return c;
}

}  // namespace testutil
