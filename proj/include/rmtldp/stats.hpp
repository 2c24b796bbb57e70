#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <stdexcept>
#include <vector>

namespace rmtldp {

/// Streaming mean/variance (Welford). Merging is exact up to rounding and is
/// applied in a fixed order by callers so reductions stay deterministic.
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
    const double total = static_cast<double>(n_ + o.n_);
    const double d = o.mean_ - mean_;
    mean_ += d * static_cast<double>(o.n_) / total;
    m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / total;
    n_ += o.n_;
  }

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double stderr_of_mean() const {
    return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Wilson score interval for a binomial proportion (z = 1.96 by default).
/// With zero hits the lower end is exactly 0, i.e. a one-sided bound.
inline Interval wilson_interval(std::size_t hits, std::size_t trials, double z = 1.96) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  Interval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
  if (hits == 0) ci.lo = 0.0;
  if (hits == trials) ci.hi = 1.0;
  return ci;
}

/// Mean and batch-means standard error of a correlated series.
struct BatchMeans {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t batches = 0;
};

inline BatchMeans batch_means(std::span<const double> series, std::size_t n_batches = 20) {
  BatchMeans out;
  if (series.empty()) return out;
  out.mean = std::accumulate(series.begin(), series.end(), 0.0) /
             static_cast<double>(series.size());
  n_batches = std::min(n_batches, series.size());
  if (n_batches < 2) return out;
  const std::size_t len = series.size() / n_batches;
  RunningStats across;
  for (std::size_t b = 0; b < n_batches; ++b) {
    const auto first = series.begin() + static_cast<std::ptrdiff_t>(b * len);
    across.add(std::accumulate(first, first + static_cast<std::ptrdiff_t>(len), 0.0) /
               static_cast<double>(len));
  }
  out.batches = n_batches;
  out.stderr_ = across.stderr_of_mean();
  return out;
}

/// Geweke z-score comparing the first 10% and the last 50% of a chain, with
/// batch-means variances inside each segment.
inline double geweke_z(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 40) return 0.0;
  const auto head = series.first(n / 10);
  const auto tail = series.last(n / 2);
  const auto a = batch_means(head, 5);
  const auto b = batch_means(tail, 10);
  const double s = std::hypot(a.stderr_, b.stderr_);
  if (s == 0.0) return a.mean == b.mean ? 0.0 : std::numeric_limits<double>::infinity();
  return (a.mean - b.mean) / s;
}

/// Sup-distance between the empirical CDF of `sample` and `cdf`.
template <typename Cdf>
double kolmogorov_distance(std::vector<double> sample, Cdf&& cdf) {
  if (sample.empty()) throw std::invalid_argument("kolmogorov_distance: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f),
                  std::abs(f - static_cast<double>(i) / n)});
  }
  return d;
}

/// Probability estimate for a rare event {statistic >= x}.
struct DeviationEstimate {
  std::size_t n = 0;  // matrix dimension or particle count
  double x = 0.0;
  double p_hat = 0.0;
  double stderr_ = 0.0;
  Interval ci{0.0, 1.0};
  std::size_t n_trials = 0;
  std::size_t hits = 0;
  std::string method = "naive";
  double slope = std::numeric_limits<double>::quiet_NaN();  // -log p_hat / n^speed
  double ess = 0.0;
  bool flagged = false;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty input");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

}  // namespace rmtldp
