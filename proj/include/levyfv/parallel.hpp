#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "levyfv/rng.hpp"

namespace levyfv {

struct McContext {
  RngPolicy policy{};
  unsigned workers = 1;
  std::uint64_t domain = 0;

  McContext with_domain(std::uint64_t d) const {
    McContext c = *this;
    c.domain = d;
    return c;
  }
  // Disjoint sub-domain for the i-th independent job of one check.
  McContext sub(std::uint64_t i) const {
    McContext c = *this;
    c.domain = domain * 1000003ULL + i + 1;
    return c;
  }
};

// Runs fn(rng, acc, path_index) for n paths. Chunk accumulators start as copies
// of init and are merged strictly in chunk order, so the result is independent
// of the worker count.
template <class Acc, class Fn>
Acc run_paths(std::uint64_t n, const McContext& ctx, const Acc& init, Fn&& fn) {
  const std::uint64_t cs = std::max<std::uint64_t>(1, ctx.policy.chunk_size);
  const std::uint64_t chunks = (n + cs - 1) / cs;
  std::vector<Acc> parts(chunks, init);

  auto do_chunk = [&](std::uint64_t c) {
    const std::uint64_t lo = c * cs;
    const std::uint64_t hi = std::min(n, lo + cs);
    Acc& acc = parts[c];
    for (std::uint64_t i = lo; i < hi; ++i) {
      Rng rng = ctx.policy.stream(ctx.domain, i);
      fn(rng, acc, i);
    }
  };

  const unsigned w = std::max(1u, std::min<unsigned>(ctx.workers, static_cast<unsigned>(std::max<std::uint64_t>(1, chunks))));
  if (w == 1) {
    for (std::uint64_t c = 0; c < chunks; ++c) do_chunk(c);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (unsigned t = 0; t < w; ++t) {
      pool.emplace_back([&] {
        try {
          for (std::uint64_t c = next++; c < chunks; c = next++) do_chunk(c);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!err) err = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
  }

  Acc out = init;
  for (const auto& p : parts) out.merge(p);
  return out;
}

// Plain counters / sums with elementwise merge.
struct Counts {
  std::vector<double> v;
  Counts() = default;
  explicit Counts(std::size_t n) : v(n, 0.0) {}
  void merge(const Counts& o) {
    if (v.size() < o.v.size()) v.resize(o.v.size(), 0.0);
    for (std::size_t i = 0; i < o.v.size(); ++i) v[i] += o.v[i];
  }
};

}  // namespace levyfv
