#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace rmtldp {

/// Convex remainder w in V(x) = b|x|^alpha + w(x).
enum class Remainder { Zero, Quadratic, Absolute };

inline const char* to_string(Remainder w) {
  switch (w) {
    case Remainder::Zero: return "zero";
    case Remainder::Quadratic: return "quadratic";
    case Remainder::Absolute: return "absolute";
  }
  return "?";
}

inline Remainder remainder_from_string(const std::string& s) {
  if (s == "zero") return Remainder::Zero;
  if (s == "quadratic") return Remainder::Quadratic;
  if (s == "absolute") return Remainder::Absolute;
  throw InvalidInput("unknown potential remainder '" + s + "' (expected zero, quadratic or absolute)");
}

struct Potential {
  double b = 1.0;
  double alpha = 2.0;
  Remainder w = Remainder::Zero;
  double c = 0.0;
  double beta = 1.0;

  void validate() const {
    if (!(b > 0.0)) throw InvalidInput("Potential: b must be positive");
    if (!(alpha >= 2.0) || !std::isfinite(alpha)) throw InvalidInput("Potential: alpha must be >= 2");
    if (!(beta > 0.0)) throw InvalidInput("Potential: beta must be positive");
    if (!(c >= 0.0)) throw InvalidInput("Potential: remainder coefficient must be >= 0");
    if (w == Remainder::Quadratic && !(alpha > 2.0))
      throw InvalidInput("Potential: a quadratic remainder needs alpha > 2");
  }

  double operator()(double x) const {
    const double ax = std::abs(x);
    double v = b * (alpha == 2.0 ? ax * ax : std::pow(ax, alpha));
    if (w == Remainder::Quadratic) v += c * x * x;
    if (w == Remainder::Absolute) v += c * ax;
    return v;
  }
};

/// beta sum_{i<j} log|l_i - l_j| - N sum_i V(l_i); -inf on a collision.
inline double loggas_logdensity(std::span<const double> lambdas, const Potential& v) {
  const std::size_t n = lambdas.size();
  if (n < 2) throw InvalidInput("loggas_logdensity: N must be >= 2");
  for (double l : lambdas)
    if (!std::isfinite(l)) throw InvalidInput("loggas_logdensity: non-finite coordinate");
  double inter = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double gap = std::abs(lambdas[i] - lambdas[j]);
      if (gap == 0.0) return -std::numeric_limits<double>::infinity();
      inter += std::log(gap);
    }
  double confine = 0.0;
  for (double l : lambdas) confine += v(l);
  return v.beta * inter - static_cast<double>(n) * confine;
}

/// Change in log-density when coordinate i moves to y, in O(N).
inline double log_density_delta(std::span<const double> lambdas, std::size_t i, double y,
                                const Potential& v) {
  const double x = lambdas[i];
  double inter = 0.0;
  for (std::size_t j = 0; j < lambdas.size(); ++j) {
    if (j == i) continue;
    const double to = std::abs(y - lambdas[j]);
    if (to == 0.0) return -std::numeric_limits<double>::infinity();
    inter += std::log(to) - std::log(std::abs(x - lambdas[j]));
  }
  return v.beta * inter - static_cast<double>(lambdas.size()) * (v(y) - v(x));
}

inline double metropolis_acceptance(double log_ratio) {
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

struct GasState {
  std::vector<double> lambdas;
  double step = 0.1;
  std::uint64_t accept_count = 0;
  std::uint64_t proposal_count = 0;
  std::uint64_t sweep_count = 0;
  Stream rng;

  double acceptance() const {
    return proposal_count == 0 ? 1.0
                               : static_cast<double>(accept_count) / static_cast<double>(proposal_count);
  }
};

/// Evenly spaced start on [-1, 1] scaled to the potential's natural width.
inline GasState initial_state(const Potential& v, std::size_t n, Stream rng) {
  if (n < 2) throw InvalidInput("initial_state: N must be >= 2");
  v.validate();
  GasState s;
  const double width = std::pow(1.0 / v.b, 1.0 / v.alpha);
  s.lambdas.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    s.lambdas[i] = width * (-1.0 + 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n));
  s.step = width / static_cast<double>(n);
  s.rng = rng;
  return s;
}

/// One Metropolis pass over the coordinates in index order.
inline void mcmc_sweep_inplace(GasState& s, const Potential& v) {
  for (std::size_t i = 0; i < s.lambdas.size(); ++i) {
    const double y = s.lambdas[i] + s.step * s.rng.normal();
    const double u = s.rng.uniform();
    ++s.proposal_count;
    if (u < metropolis_acceptance(log_density_delta(s.lambdas, i, y, v))) {
      s.lambdas[i] = y;
      ++s.accept_count;
    }
  }
  ++s.sweep_count;
}

inline GasState mcmc_sweep(GasState s, const Potential& v) {
  mcmc_sweep_inplace(s, v);
  return s;
}

/// Burn-in with step adaptation toward acceptance 0.4 +- 0.1 in windows of
/// `window` sweeps. Counters are reset afterwards; the step is then fixed.
inline void burn_in(GasState& s, const Potential& v, std::uint64_t sweeps, std::uint64_t window = 50) {
  std::uint64_t acc0 = s.accept_count, prop0 = s.proposal_count;
  for (std::uint64_t k = 1; k <= sweeps; ++k) {
    mcmc_sweep_inplace(s, v);
    if (k % window == 0) {
      const double rate = static_cast<double>(s.accept_count - acc0) /
                          static_cast<double>(s.proposal_count - prop0);
      if (rate > 0.5) s.step *= 1.25;
      if (rate < 0.3) s.step /= 1.25;
      acc0 = s.accept_count;
      prop0 = s.proposal_count;
    }
  }
  s.accept_count = 0;
  s.proposal_count = 0;
}

inline double moment(std::span<const double> lambdas, int p) {
  if (lambdas.empty()) throw InvalidInput("moment: empty input");
  if (p < 0) throw InvalidInput("moment: p must be >= 0");
  double s = 0.0;
  for (double l : lambdas) s += std::pow(l, p);
  return s / static_cast<double>(lambdas.size());
}

/// floor(ln N): number of coordinates kept by the truncated moment.
inline std::size_t truncation_count(std::size_t n) {
  return static_cast<std::size_t>(std::floor(std::log(static_cast<double>(n))));
}

/// (1/N) times the sum of p-th powers of the floor(ln N) coordinates of largest modulus.
inline double truncated_moment(std::span<const double> lambdas, int p) {
  const std::size_t n = lambdas.size();
  if (n < 3) throw InvalidInput("truncated_moment: N must be >= 3");
  std::vector<double> sorted(lambdas.begin(), lambdas.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](double a, double b) { return std::abs(a) > std::abs(b); });
  double s = 0.0;
  for (std::size_t i = 0; i < truncation_count(n); ++i) s += std::pow(sorted[i], p);
  return s / static_cast<double>(n);
}

struct McmcOptions {
  std::uint64_t burn_in = 10000;
  std::uint64_t thin = 0;  // 0 means N
  std::size_t chains = 4;
};

/// Runs independent chains (stream = chain index) and records thinned states.
inline std::vector<std::vector<std::vector<double>>> run_chains(const Potential& v, std::size_t n,
                                                                std::size_t n_samples,
                                                                const McmcOptions& opt,
                                                                std::uint64_t seed,
                                                                std::vector<double>* acceptance = nullptr) {
  v.validate();
  const std::size_t chains = std::max<std::size_t>(1, std::min(opt.chains, n_samples));
  const std::uint64_t thin = opt.thin == 0 ? n : opt.thin;
  std::vector<std::vector<std::vector<double>>> out(chains);
  std::vector<double> acc(chains);
  parallel_for(chains, [&](std::size_t c) {
    GasState s = initial_state(v, n, Stream::derive(seed, domain::kChain, c));
    burn_in(s, v, opt.burn_in);
    const std::size_t mine = n_samples / chains + (c < n_samples % chains ? 1 : 0);
    out[c].reserve(mine);
    for (std::size_t k = 0; k < mine; ++k) {
      for (std::uint64_t t = 0; t < thin; ++t) mcmc_sweep_inplace(s, v);
      out[c].push_back(s.lambdas);
    }
    acc[c] = s.acceptance();
  });
  if (acceptance) *acceptance = acc;
  return out;
}

struct MomentEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  double geweke_z = 0.0;  // largest |z| over chains
  bool flagged = false;   // some chain failed the Geweke check at 3 sigma
  std::size_t samples = 0;
};

/// Chain-wise batch means, pooled with equal weights per sample.
template <typename Stat>
MomentEstimate pooled_estimate(const std::vector<std::vector<std::vector<double>>>& chains, Stat&& stat) {
  MomentEstimate e;
  double var = 0.0;
  for (const auto& chain : chains) {
    std::vector<double> series;
    series.reserve(chain.size());
    for (const auto& state : chain) series.push_back(stat(state));
    const auto bm = batch_means(series);
    const double w = static_cast<double>(series.size());
    e.estimate += bm.mean * w;
    var += bm.stderr_ * bm.stderr_ * w * w;
    e.samples += series.size();
    const double z = geweke_z(series);
    if (std::abs(z) > std::abs(e.geweke_z)) e.geweke_z = z;
  }
  const double total = static_cast<double>(e.samples);
  e.estimate /= total;
  e.stderr_ = std::sqrt(var) / total;
  e.flagged = std::abs(e.geweke_z) > 3.0;
  return e;
}

/// Monte Carlo estimate of E m_{p,N} under the beta-ensemble.
inline MomentEstimate estimate_equilibrium_moment(const Potential& v, int p, std::size_t n,
                                                  std::size_t n_samples, std::uint64_t seed,
                                                  const McmcOptions& opt = {}) {
  v.validate();
  if (p < 0) throw InvalidInput("estimate_equilibrium_moment: p must be >= 0");
  if (n < 3) throw InvalidInput("estimate_equilibrium_moment: N must be >= 3");
  if (n_samples < 2) throw InvalidInput("estimate_equilibrium_moment: need at least 2 samples");
  if (p == 0) return {1.0, 0.0, 0.0, false, 0};
  const auto chains = run_chains(v, n, n_samples, opt, seed);
  return pooled_estimate(chains, [p](const std::vector<double>& l) { return moment(l, p); });
}

/// Exact sampler for d mu_V = exp(-N V(x)) dx / Z_N: rejection from a centered
/// Gaussian envelope with a numerically maximized envelope constant.
class IidSampler {
 public:
  IidSampler(const Potential& v, std::size_t n) : v_(v), n_(static_cast<double>(n)) {
    v.validate();
    if (n < 1) throw InvalidInput("IidSampler: N must be >= 1");
    // Support effectively ends where N V(x) = 60.
    double hi = 1.0;
    while (n_ * v_(hi) < 60.0) hi *= 2.0;
    double lo = 0.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (n_ * v_(mid) < 60.0 ? lo : hi) = mid;
    }
    reach_ = hi;
    using boost::math::quadrature::gauss_kronrod;
    auto dens = [&](double x) { return std::exp(-n_ * v_(x)); };
    auto second = [&](double x) { return x * x * std::exp(-n_ * v_(x)); };
    const double z = gauss_kronrod<double, 61>::integrate(dens, 0.0, reach_, 15, 1e-12);
    sd_ = std::sqrt(gauss_kronrod<double, 61>::integrate(second, 0.0, reach_, 15, 1e-12) / z);
    s_ = 1.25 * sd_;
    if (v.alpha == 2.0) s_ = std::max(s_, 1.05 / std::sqrt(2.0 * n_ * v.b));
    // log M = sup_x [ -N V(x) + x^2 / (2 s^2) ], attained on [0, reach].
    auto log_ratio = [&](double x) { return -n_ * v_(x) + x * x / (2.0 * s_ * s_); };
    const int grid = 20000;
    double best = log_ratio(0.0), arg = 0.0;
    const double span = 4.0 * reach_;
    for (int g = 1; g <= grid; ++g) {
      const double x = span * g / grid;
      const double r = log_ratio(x);
      if (r > best) best = r, arg = x;
    }
    double a = std::max(0.0, arg - span / grid), b = arg + span / grid;
    for (int it = 0; it < 200; ++it) {
      const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
      if (log_ratio(m1) < log_ratio(m2))
        a = m1;
      else
        b = m2;
    }
    log_m_ = std::max(best, log_ratio(0.5 * (a + b))) + 1e-9;
  }

  double stddev() const { return sd_; }
  double envelope_scale() const { return s_; }

  double sample(Stream& rng) const {
    for (;;) {
      const double x = s_ * rng.normal();
      const double log_accept = -n_ * v_(x) + x * x / (2.0 * s_ * s_) - log_m_;
      if (std::log(rng.uniform()) < log_accept) return x;
    }
  }

 private:
  Potential v_;
  double n_;
  double reach_ = 1.0;
  double sd_ = 1.0;
  double s_ = 1.0;
  double log_m_ = 0.0;
};

/// P((1/N) sum_{i<=floor(ln N)} X_i^p >= x) for X_i iid with law mu_V, by
/// direct simulation with a Wilson interval.
inline DeviationEstimate iid_truncated_tail(const Potential& v, int p, std::size_t n, double x,
                                            std::size_t n_trials, std::uint64_t seed) {
  if (!(x > 0.0)) throw InvalidInput("iid_truncated_tail: x must be positive");
  if (n < 3) throw InvalidInput("iid_truncated_tail: N must be >= 3");
  if (n_trials == 0) throw InvalidInput("iid_truncated_tail: n_trials must be positive");
  const IidSampler sampler(v, n);
  const std::size_t k = truncation_count(n);
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (n_trials + kChunk - 1) / kChunk;
  std::vector<std::size_t> hits(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    Stream rng = Stream::derive(seed, domain::kIid, c);
    for (std::size_t t = c * kChunk; t < std::min(n_trials, (c + 1) * kChunk); ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += std::pow(sampler.sample(rng), p);
      hits[c] += s / static_cast<double>(n) >= x;
    }
  });
  DeviationEstimate e;
  e.n = n;
  e.x = x;
  e.n_trials = n_trials;
  e.hits = std::accumulate(hits.begin(), hits.end(), std::size_t{0});
  e.p_hat = static_cast<double>(e.hits) / static_cast<double>(n_trials);
  e.stderr_ = std::sqrt(e.p_hat * (1.0 - e.p_hat) / static_cast<double>(n_trials));
  e.ci = wilson_interval(e.hits, n_trials);
  e.method = "iid";
  e.ess = static_cast<double>(n_trials);
  const double speed = 1.0 + v.alpha / p;
  if (e.p_hat > 0.0) e.slope = -std::log(e.p_hat) / std::pow(static_cast<double>(n), speed);
  return e;
}

/// 1-Lipschitz test functions for the concentration probe.
enum class LipschitzFn { ClippedIdentity, ClippedAbs, Sine };

inline const char* to_string(LipschitzFn f) {
  switch (f) {
    case LipschitzFn::ClippedIdentity: return "clipped_identity";
    case LipschitzFn::ClippedAbs: return "clipped_abs";
    case LipschitzFn::Sine: return "sine";
  }
  return "?";
}

inline LipschitzFn lipschitz_from_string(const std::string& s) {
  if (s == "clipped_identity") return LipschitzFn::ClippedIdentity;
  if (s == "clipped_abs") return LipschitzFn::ClippedAbs;
  if (s == "sine") return LipschitzFn::Sine;
  throw InvalidInput("unknown test function '" + s + "'");
}

inline double apply_lipschitz(LipschitzFn f, double x, double clip = 3.0) {
  switch (f) {
    case LipschitzFn::ClippedIdentity: return std::clamp(x, -clip, clip);
    case LipschitzFn::ClippedAbs: return std::min(std::abs(x), clip);
    case LipschitzFn::Sine: return std::sin(x);
  }
  return x;
}

/// exp(-b N^2 t^alpha / (2^{alpha-1} alpha (alpha-1)^{alpha-1})); equals 1 at t <= 0.
inline double linear_statistic_bound(const Potential& v, std::size_t n, double t) {
  if (t <= 0.0) return 1.0;
  const double a = v.alpha;
  const double k = std::pow(2.0, a - 1.0) * a * std::pow(a - 1.0, a - 1.0);
  const double nn = static_cast<double>(n);
  return std::exp(-v.b * nn * nn * std::pow(t, a) / k);
}

struct ConcentrationRow {
  double t = 0.0;
  std::size_t hits = 0;
  double frequency = 0.0;
  double stderr_ = 0.0;
  double bound = 1.0;
  bool violated = false;  // frequency > bound + 3 stderr
};

/// Exceedance frequency of (1/N) sum f(lambda_i) above its sample mean along
/// thinned chain samples, next to the explicit concentration bound.
inline std::vector<ConcentrationRow> conckconv_probe(const Potential& v, LipschitzFn f, std::size_t n,
                                                     const std::vector<double>& t_grid,
                                                     std::size_t n_samples, std::uint64_t seed,
                                                     const McmcOptions& opt = {}) {
  v.validate();
  if (t_grid.empty()) throw InvalidInput("conckconv_probe: empty t grid");
  const auto chains = run_chains(v, n, n_samples, opt, seed);
  std::vector<std::vector<double>> stat(chains.size());
  double mean = 0.0;
  std::size_t total = 0;
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (const auto& l : chains[c]) {
      double s = 0.0;
      for (double x : l) s += apply_lipschitz(f, x);
      stat[c].push_back(s / static_cast<double>(n));
      mean += stat[c].back();
      ++total;
    }
  mean /= static_cast<double>(total);
  std::vector<ConcentrationRow> rows;
  for (double t : t_grid) {
    ConcentrationRow r;
    r.t = t;
    double var = 0.0;
    for (const auto& series : stat) {
      std::vector<double> ind;
      for (double g : series) ind.push_back(g - mean > t ? 1.0 : 0.0);
      r.hits += static_cast<std::size_t>(std::accumulate(ind.begin(), ind.end(), 0.0));
      const auto bm = batch_means(ind);
      const double w = static_cast<double>(ind.size());
      var += bm.stderr_ * bm.stderr_ * w * w;
    }
    r.frequency = static_cast<double>(r.hits) / static_cast<double>(total);
    r.stderr_ = std::sqrt(var) / static_cast<double>(total);
    r.bound = linear_statistic_bound(v, n, t);
    r.violated = r.frequency > r.bound + 3.0 * r.stderr_;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace rmtldp
