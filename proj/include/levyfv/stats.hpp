#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace levyfv {

struct EstimateWithError {
  double value = 0.0;
  double se = 0.0;
  std::uint64_t n = 0;
};

// Welford accumulator; merge() is Chan's pairwise update.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }

  void merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(n_ + o.n_);
    const double d = o.mean_ - mean_;
    mean_ += d * static_cast<double>(o.n_) / n;
    m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    n_ += o.n_;
  }

  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double se() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }
  EstimateWithError estimate() const { return {mean_, se(), n_}; }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

class StatsArray {
 public:
  StatsArray() = default;
  explicit StatsArray(std::size_t n) : s_(n) {}

  void add(std::size_t i, double x) { s_[i].add(x); }
  void merge(const StatsArray& o) {
    if (s_.empty()) s_.resize(o.s_.size());
    for (std::size_t i = 0; i < o.s_.size(); ++i) s_[i].merge(o.s_[i]);
  }
  std::size_t size() const { return s_.size(); }
  const RunningStats& operator[](std::size_t i) const { return s_[i]; }
  EstimateWithError estimate(std::size_t i) const { return s_[i].estimate(); }

 private:
  std::vector<RunningStats> s_;
};

// Mean vector and co-moment matrix, for delta-method errors of smooth functions of means.
class CovAccumulator {
 public:
  CovAccumulator() = default;
  explicit CovAccumulator(std::size_t d) : mean_(d, 0.0), c_(d * d, 0.0) {}

  void add(const std::vector<double>& x) {
    ++n_;
    const std::size_t d = mean_.size();
    std::vector<double> dx(d);
    for (std::size_t i = 0; i < d; ++i) {
      dx[i] = x[i] - mean_[i];
      mean_[i] += dx[i] / static_cast<double>(n_);
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) c_[i * d + j] += dx[i] * (x[j] - mean_[j]);
  }

  void merge(const CovAccumulator& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const std::size_t d = mean_.size();
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_), n = na + nb;
    std::vector<double> delta(d);
    for (std::size_t i = 0; i < d; ++i) delta[i] = o.mean_[i] - mean_[i];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) c_[i * d + j] += o.c_[i * d + j] + delta[i] * delta[j] * na * nb / n;
    for (std::size_t i = 0; i < d; ++i) mean_[i] += delta[i] * nb / n;
    n_ += o.n_;
  }

  std::uint64_t count() const { return n_; }
  double mean(std::size_t i) const { return mean_[i]; }
  double cov(std::size_t i, std::size_t j) const {
    return n_ > 1 ? c_[i * mean_.size() + j] / static_cast<double>(n_ - 1) : 0.0;
  }
  // SE of sum_i g_i * mean_i
  double linear_se(const std::vector<double>& g) const {
    if (n_ < 2) return 0.0;
    double v = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j) v += g[i] * g[j] * cov(i, j);
    return std::sqrt(std::max(v, 0.0) / static_cast<double>(n_));
  }

 private:
  std::uint64_t n_ = 0;
  std::vector<double> mean_;
  std::vector<double> c_;
};

inline EstimateWithError binomial_estimate(std::uint64_t hits, std::uint64_t n) {
  if (n == 0) return {};
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n)), n};
}

inline double combined_se(double a, double b) { return std::sqrt(a * a + b * b); }

}  // namespace levyfv
