#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "matcore.hpp"
#include "parallel.hpp"
#include "randsrc.hpp"
#include "rates.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "varopt.hpp"
#include "wigner.hpp"

namespace rmtldp {

namespace detail {

constexpr std::size_t kTrialChunk = 1024;

inline double normalized_moment(const HermMatrix& raw, int p) {
  const double n = static_cast<double>(raw.dim());
  return trace_power_direct(raw, p) / std::pow(n, 1.0 + 0.5 * p);
}

inline double finite_or_inf_slope(double p_hat, double scale) {
  if (!(p_hat > 0.0)) return std::numeric_limits<double>::infinity();
  if (p_hat >= 1.0) return 0.0;
  return -std::log(p_hat) / scale;
}

}  // namespace detail

/// Rate function of tr_N X_N^p for a Wigner model. For tails without a
/// Gaussian factor c_p is the closed form where known, the solver otherwise.
inline RateSpec model_rate_spec(const EntrySource& src, int p) {
  if (const auto* g = std::get_if<GaussianProfile>(&src)) return gaussian_rate_spec(*g, p);
  const auto& prof = std::get<WgEntryLaw>(src).profile();
  double cp;
  if (p % 2 == 0 && prof.alpha <= 1.0) {
    cp = wg_cp_closed_form(prof.alpha, prof.a, prof.b, p);
  } else {
    CpOptions opt;
    opt.phase_diag = prof.phase_diag;
    opt.phase_offdiag = prof.phase_offdiag;
    cp = solve_cp(prof.alpha, prof.a, prof.b, p, opt).value;
  }
  return wg_rate_spec(cp, prof.alpha, p);
}

inline double model_speed(const EntrySource& src, int p) { return speed_exponent(model_rate_spec(src, p)); }

/// Direct frequency of {tr_N X_N^p >= x}, Wilson interval, trial t on stream
/// (seed, naive, t).
inline DeviationEstimate estimate_tail_naive(const EntrySource& src, std::size_t n, int p, double x,
                                             std::size_t n_trials, std::uint64_t seed) {
  if (n_trials < 1) throw InvalidInput("estimate_tail_naive: n_trials must be >= 1");
  if (n < 2) throw InvalidInput("estimate_tail_naive: n must be >= 2");
  if (std::isnan(x)) throw InvalidInput("estimate_tail_naive: x is NaN");
  const std::size_t chunks = (n_trials + detail::kTrialChunk - 1) / detail::kTrialChunk;
  std::vector<std::size_t> hits(chunks, 0);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(n_trials, (c + 1) * detail::kTrialChunk);
    for (std::size_t t = c * detail::kTrialChunk; t < end; ++t) {
      Stream rng = Stream::derive(seed, domain::kNaive, t);
      if (detail::normalized_moment(sample_raw_wigner(n, src, rng), p) >= x) ++hits[c];
    }
  });
  DeviationEstimate e;
  e.n = n;
  e.x = x;
  e.n_trials = n_trials;
  for (auto h : hits) e.hits += h;
  const double nt = static_cast<double>(n_trials);
  e.p_hat = static_cast<double>(e.hits) / nt;
  e.stderr_ = std::sqrt(e.p_hat * (1.0 - e.p_hat) / nt);
  e.ci = wilson_interval(e.hits, n_trials);
  e.method = "naive";
  e.ess = nt;
  e.slope = detail::finite_or_inf_slope(e.p_hat, std::pow(static_cast<double>(n), model_speed(src, p)));
  e.flagged = e.hits == 0;
  return e;
}

/// Where the planted proposal puts its entry.
struct PlantChoice {
  PlantShape shape = PlantShape::DiagSpike;
  double theta = 0.0;  // in the X_N scale
  double shift = 0.0;  // raw-entry scale, theta sqrt(n)
};

/// Gaussian: spike when 1/sigma^2 <= beta/2, pair otherwise. WG: spike when
/// b <= 2^{-alpha/p} a.
inline PlantChoice plant_choice(const EntrySource& src, std::size_t n, int p, double delta) {
  PlantChoice c;
  if (const auto* g = std::get_if<GaussianProfile>(&src)) {
    c.shape = 1.0 / g->sigma2 <= g->beta / 2.0 ? PlantShape::DiagSpike : PlantShape::OffdiagPair;
  } else {
    const auto& prof = std::get<WgEntryLaw>(src).profile();
    c.shape = prof.b <= std::pow(2.0, -prof.alpha / p) * prof.a ? PlantShape::DiagSpike : PlantShape::OffdiagPair;
  }
  if (delta > 0.0) c.theta = plant_height(PlantSpec{c.shape, delta, std::max(p, 3)}, n);
  c.shift = c.theta * std::sqrt(static_cast<double>(n));
  return c;
}

struct PlantedIsOptions {
  double mixture = 0.5;  // probability of drawing the planted entry
  double min_ess = 50.0;
};

/// Self-normalized importance sampling with a defensive mixture proposal:
/// with probability rho the planted entry is redrawn from a shifted law
/// (Gaussian mean shift by theta sqrt(n), or the WG modulus conditioned to
/// exceed theta sqrt(n)), otherwise the matrix is nominal. The weight is the
/// exact one-dimensional density ratio of that entry.
inline DeviationEstimate estimate_tail_planted_is(const EntrySource& src, std::size_t n, int p, double x,
                                                  std::size_t n_trials, std::uint64_t seed,
                                                  const PlantedIsOptions& opt = {}) {
  if (p % 2 != 0) throw InvalidInput("estimate_tail_planted_is: even p only");
  if (n_trials < 1) throw InvalidInput("estimate_tail_planted_is: n_trials must be >= 1");
  if (n < 2) throw InvalidInput("estimate_tail_planted_is: n must be >= 2");
  if (!(opt.mixture >= 0.0 && opt.mixture < 1.0)) throw InvalidInput("estimate_tail_planted_is: mixture in [0,1)");
  const double center = semicircle_moment(p);
  if (!(x >= center)) throw InvalidInput("estimate_tail_planted_is: x must be >= the center");

  const PlantChoice pc = plant_choice(src, n, p, x - center);
  const bool diag = pc.shape == PlantShape::DiagSpike;
  const std::size_t pi = 0, pj = diag ? 0 : 1;
  const EntryRole role = diag ? EntryRole::Diagonal : EntryRole::OffDiagonal;
  const double rho = pc.shift > 0.0 ? opt.mixture : 0.0;

  // Density ratio proposal/nominal for the planted entry value y.
  double comp_var = 1.0, tail_s = 1.0;
  const ModulusLaw* mod = nullptr;
  if (const auto* g = std::get_if<GaussianProfile>(&src)) {
    comp_var = diag ? g->sigma2 : (g->beta == 1 ? 1.0 : 0.5);
  } else {
    mod = &std::get<WgEntryLaw>(src).modulus(role);
    tail_s = mod->survival(pc.shift);
    if (!(tail_s > 0.0)) throw InvalidInput("estimate_tail_planted_is: shift beyond the representable tail");
  }
  auto ratio = [&](cplx y) {
    if (mod) return std::abs(y) >= pc.shift ? 1.0 / tail_s : 0.0;
    const double mu = pc.shift;
    return std::exp((2.0 * y.real() * mu - mu * mu) / (2.0 * comp_var));
  };
  auto draw_planted = [&](Stream& rng) -> cplx {
    if (const auto* g = std::get_if<GaussianProfile>(&src)) return sample_gaussian_entry(*g, role, rng) + pc.shift;
    const auto& law = std::get<WgEntryLaw>(src);
    double r;
    if (pc.shift >= mod->t0()) {
      r = std::pow(std::pow(pc.shift, mod->alpha()) + rng.exponential() / mod->rate(), 1.0 / mod->alpha());
    } else {
      do r = mod->sample(rng);
      while (r < pc.shift);
    }
    switch (law.profile().phase(role)) {
      case PhaseLaw::Sign: return rng.uniform() < 0.5 ? -r : r;
      case PhaseLaw::Circle: return std::polar(r, 2.0 * std::numbers::pi * rng.uniform());
      case PhaseLaw::Plus: return r;
    }
    return r;
  };

  struct Acc {
    double sw = 0.0, sw2 = 0.0, swh = 0.0, sw2h = 0.0;
    std::size_t hits = 0;
  };
  const std::size_t chunks = (n_trials + detail::kTrialChunk - 1) / detail::kTrialChunk;
  std::vector<Acc> acc(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(n_trials, (c + 1) * detail::kTrialChunk);
    auto& a = acc[c];
    for (std::size_t t = c * detail::kTrialChunk; t < end; ++t) {
      Stream rng = Stream::derive(seed, domain::kPlanted, t);
      HermMatrix raw = sample_raw_wigner(n, src, rng);
      if (rho > 0.0 && rng.uniform() < rho) raw.set(pi, pj, draw_planted(rng));
      const double w = rho > 0.0 ? 1.0 / ((1.0 - rho) + rho * ratio(raw(pi, pj))) : 1.0;
      const bool hit = detail::normalized_moment(raw, p) >= x;
      a.sw += w;
      a.sw2 += w * w;
      if (hit) {
        a.swh += w;
        a.sw2h += w * w;
        ++a.hits;
      }
    }
  });
  Acc total;
  for (const auto& a : acc) {
    total.sw += a.sw;
    total.sw2 += a.sw2;
    total.swh += a.swh;
    total.sw2h += a.sw2h;
    total.hits += a.hits;
  }
  DeviationEstimate e;
  e.n = n;
  e.x = x;
  e.n_trials = n_trials;
  e.hits = total.hits;
  e.method = "planted_is";
  e.p_hat = total.swh / total.sw;
  // sum w^2 (1{hit} - p_hat)^2
  const double q = 1.0 - e.p_hat;
  const double var = q * q * total.sw2h + e.p_hat * e.p_hat * (total.sw2 - total.sw2h);
  e.stderr_ = std::sqrt(var) / total.sw;
  e.ci = {std::max(0.0, e.p_hat - 1.96 * e.stderr_), std::min(1.0, e.p_hat + 1.96 * e.stderr_)};
  e.ess = total.sw * total.sw / total.sw2;
  e.slope = detail::finite_or_inf_slope(e.p_hat, std::pow(static_cast<double>(n), model_speed(src, p)));
  e.flagged = e.ess < opt.min_ess || e.hits == 0;
  return e;
}

/// Mean and standard error of the unnormalized weights under the proposal.
struct WeightCheck {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline WeightCheck planted_weight_check(const EntrySource& src, std::size_t n, int p, double x,
                                        std::size_t n_trials, std::uint64_t seed, const PlantedIsOptions& opt = {}) {
  // The weight depends on one entry only; replay that entry's draws.
  const double center = semicircle_moment(p);
  const PlantChoice pc = plant_choice(src, n, p, x - center);
  const bool diag = pc.shape == PlantShape::DiagSpike;
  const EntryRole role = diag ? EntryRole::Diagonal : EntryRole::OffDiagonal;
  RunningStats st;
  std::vector<double> ws(n_trials);
  parallel_for(n_trials, [&](std::size_t t) {
    Stream rng = Stream::derive(seed, domain::kPlanted, t);
    cplx y = sample_entry(src, role, rng);
    double r = 1.0;
    if (const auto* g = std::get_if<GaussianProfile>(&src)) {
      const double v = diag ? g->sigma2 : (g->beta == 1 ? 1.0 : 0.5);
      if (rng.uniform() < opt.mixture) y += pc.shift;
      r = std::exp((2.0 * y.real() * pc.shift - pc.shift * pc.shift) / (2.0 * v));
    } else {
      const auto& mod = std::get<WgEntryLaw>(src).modulus(role);
      if (rng.uniform() < opt.mixture) {
        double m = mod.sample(rng);
        if (pc.shift >= mod.t0())
          m = std::pow(std::pow(pc.shift, mod.alpha()) + rng.exponential() / mod.rate(), 1.0 / mod.alpha());
        else
          while (m < pc.shift) m = mod.sample(rng);
        y = m;
      }
      r = std::abs(y) >= pc.shift ? 1.0 / mod.survival(pc.shift) : 0.0;
    }
    ws[t] = 1.0 / ((1.0 - opt.mixture) + opt.mixture * r);
  });
  for (double w : ws) st.add(w);
  return {st.mean(), st.stderr_of_mean()};
}

struct SlopeRow {
  std::size_t n = 0;
  DeviationEstimate estimate;
  double slope = 0.0;
  Interval slope_ci{0.0, 0.0};
  bool flagged = false;
};

struct SlopeScan {
  std::vector<SlopeRow> rows;
  double speed = 0.0;
  ExtendedReal rate = ExtendedReal::finite(0.0);  // J_p(x)
  double last_slope = 0.0;
  bool monotone = true;  // slopes non-decreasing in n
};

/// One row of a slope scan: planted IS for even p above the center, the
/// naive estimator otherwise.
inline SlopeRow slope_row(const EntrySource& src, int p, double x, std::size_t n, std::size_t trials,
                          std::uint64_t seed, double speed) {
  SlopeRow row;
  row.n = n;
  const bool use_is = p % 2 == 0 && x > semicircle_moment(p);
  row.estimate = use_is ? estimate_tail_planted_is(src, n, p, x, trials, seed)
                        : estimate_tail_naive(src, n, p, x, trials, seed);
  const double scale = std::pow(static_cast<double>(n), speed);
  row.slope = detail::finite_or_inf_slope(row.estimate.p_hat, scale);
  row.slope_ci = {detail::finite_or_inf_slope(row.estimate.ci.hi, scale),
                  detail::finite_or_inf_slope(row.estimate.ci.lo, scale)};
  row.flagged = row.estimate.flagged;
  return row;
}

/// -log p_hat / n^speed per n; the k-th grid point uses seed + k.
inline SlopeScan rate_slope_scan(const EntrySource& src, int p, double x, const std::vector<std::size_t>& n_grid,
                                 std::size_t trials_per_n, std::uint64_t seed) {
  if (n_grid.size() < 3) throw InvalidInput("rate_slope_scan: need at least 3 grid points");
  if (!std::is_sorted(n_grid.begin(), n_grid.end()) ||
      std::adjacent_find(n_grid.begin(), n_grid.end()) != n_grid.end())
    throw InvalidInput("rate_slope_scan: n_grid must be strictly ascending");
  SlopeScan scan;
  const RateSpec spec = model_rate_spec(src, p);
  scan.speed = speed_exponent(spec);
  scan.rate = rate_value(spec, x);
  for (std::size_t k = 0; k < n_grid.size(); ++k)
    scan.rows.push_back(slope_row(src, p, x, n_grid[k], trials_per_n, seed + k, scan.speed));
  scan.last_slope = scan.rows.back().slope;
  for (std::size_t k = 1; k < scan.rows.size(); ++k)
    if (scan.rows[k].slope < scan.rows[k - 1].slope) scan.monotone = false;
  return scan;
}

/// Bounded Gaussian entries: N(0,1) conditioned on |x| <= kappa.
inline double truncated_normal(double kappa, Stream& rng) {
  double v;
  do v = rng.normal();
  while (std::abs(v) > kappa);
  return v;
}

struct ConctrRow {
  std::size_t n = 0;
  double spike = 0.0;
  double t = 0.0;
  std::size_t hits = 0;
  double frequency = 0.0;
  double stderr_ = 0.0;
};

struct ConctrOptions {
  double kappa = 3.0;  // entry bound of H
  double m = 1.0;      // constant in the spike hypothesis
};

/// Frequencies of |tr_N(H+C)^p - E tr_N(H+C)^p| > t N^{p/2}, H a real
/// symmetric matrix with bounded entries and C = spike sqrt(n) e_1 e_1^*.
/// The expectation is replaced by the sample mean. Requires
/// tr(C/sqrt(N))^{2(p-1)} <= m N^{2-2/p}.
inline std::vector<ConctrRow> conctr_probe(std::size_t n, int p, const std::vector<double>& spikes,
                                           const std::vector<double>& t_grid, std::size_t n_trials,
                                           std::uint64_t seed, const ConctrOptions& opt = {}) {
  if (n < 2 || p < 1 || n_trials < 2) throw InvalidInput("conctr_probe: need n >= 2, p >= 1, n_trials >= 2");
  if (!(opt.kappa > 0.0)) throw InvalidInput("conctr_probe: kappa must be positive");
  const double nn = static_cast<double>(n);
  std::vector<ConctrRow> rows;
  for (std::size_t si = 0; si < spikes.size(); ++si) {
    const double spike = spikes[si];
    const double lhs = std::pow(std::abs(spike), 2.0 * (p - 1));
    const double limit = opt.m * std::pow(nn, 2.0 - 2.0 / p);
    if (lhs > limit)
      throw InvalidInput("conctr_probe: spike " + format_double(spike) + " violates tr(C/sqrt N)^{2(p-1)} <= m N^{2-2/p} with m = " +
                         format_double(opt.m));
    std::vector<double> values(n_trials);
    parallel_for(n_trials, [&](std::size_t t) {
      Stream rng = Stream::derive(seed, domain::kProbe, si * n_trials + t);
      HermMatrix h(n, 1);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) h.set(i, j, truncated_normal(opt.kappa, rng));
      h.set_diag(0, h.diag(0) + spike * std::sqrt(nn));
      values[t] = trace_power_direct(h, p) / nn;
    });
    RunningStats st;
    for (double v : values) st.add(v);
    const double scale = std::pow(nn, 0.5 * p);
    for (double t : t_grid) {
      ConctrRow r;
      r.n = n;
      r.spike = spike;
      r.t = t;
      for (double v : values) r.hits += std::abs(v - st.mean()) > t * scale;
      r.frequency = static_cast<double>(r.hits) / static_cast<double>(n_trials);
      r.stderr_ = std::sqrt(r.frequency * (1.0 - r.frequency) / static_cast<double>(n_trials));
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace rmtldp
