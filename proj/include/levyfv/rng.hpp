#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace levyfv {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** keyed by (seed, domain, index). Every simulated path owns one
// stream, so results do not depend on how paths are grouped into chunks.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t seed, std::uint64_t domain, std::uint64_t index) {
    std::uint64_t x = seed;
    x = splitmix64(x) ^ domain;
    x = splitmix64(x) ^ index;
    for (auto& w : s_) w = splitmix64(x);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t r = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return r;
  }

  // in [0, 1)
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double exponential(double rate) {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log1p(-uniform()) / rate;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

struct RngPolicy {
  std::uint64_t seed = 1;
  std::uint64_t chunk_size = 4096;

  Rng stream(std::uint64_t domain, std::uint64_t index) const { return Rng(seed, domain, index); }
};

// Stream domains. Independent estimation routes draw from distinct domains.
namespace domain {
inline constexpr std::uint64_t skeleton = 1;
inline constexpr std::uint64_t passage = 2;
inline constexpr std::uint64_t creep_p = 3;
inline constexpr std::uint64_t v_min = 4;
inline constexpr std::uint64_t v_occupation = 5;
inline constexpr std::uint64_t v_paths = 6;
inline constexpr std::uint64_t vhat_paths = 7;
inline constexpr std::uint64_t ladder = 8;
inline constexpr std::uint64_t sub_passage = 9;
inline constexpr std::uint64_t lt = 10;
inline constexpr std::uint64_t alpha = 11;
inline constexpr std::uint64_t resolvent = 12;
inline constexpr std::uint64_t monitor = 13;
}  // namespace domain

}  // namespace levyfv
