#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"
#include "matcore.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace rmtldp {

enum class EntryRole { Diagonal, OffDiagonal };

/// Phase laws. `Sign` is uniform on {-1,+1}, `Circle` uniform on the unit
/// circle, `Plus` the point mass at +1.
enum class PhaseLaw { Sign, Circle, Plus };

inline const char* to_string(PhaseLaw p) {
  switch (p) {
    case PhaseLaw::Sign: return "sign";
    case PhaseLaw::Circle: return "circle";
    case PhaseLaw::Plus: return "plus";
  }
  return "?";
}

inline PhaseLaw phase_law_from_string(const std::string& s) {
  if (s == "sign") return PhaseLaw::Sign;
  if (s == "circle") return PhaseLaw::Circle;
  if (s == "plus") return PhaseLaw::Plus;
  throw InvalidInput("unknown phase law '" + s + "' (expected sign, circle or plus)");
}

/// Entry law with a stretched-exponential tail P(|X| > t) = exp(-c t^alpha)
/// beyond t0 (c = b on the diagonal, c = a off it).
struct TailProfile {
  double alpha = 1.0;
  double a = 1.0;
  double b = 1.0;
  double t0 = 2.0;
  PhaseLaw phase_diag = PhaseLaw::Sign;
  PhaseLaw phase_offdiag = PhaseLaw::Sign;
  bool normalize_variance = true;

  int beta() const { return phase_offdiag == PhaseLaw::Circle ? 2 : 1; }
  double rate(EntryRole role) const { return role == EntryRole::Diagonal ? b : a; }
  PhaseLaw phase(EntryRole role) const {
    return role == EntryRole::Diagonal ? phase_diag : phase_offdiag;
  }

  void validate() const {
    if (!(alpha > 0.0 && alpha < 2.0)) throw InvalidInput("TailProfile: alpha must lie in (0,2)");
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidInput("TailProfile: a and b must be positive");
    if (!(t0 > 0.0) || !std::isfinite(t0)) throw InvalidInput("TailProfile: t0 must be positive");
    if (phase_diag == PhaseLaw::Circle)
      throw InvalidInput("TailProfile: diagonal entries are real, phase_diag must be sign or plus");
  }
};

struct GaussianProfile {
  double sigma2 = 1.0;
  int beta = 1;

  void validate() const {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
      throw InvalidInput("GaussianProfile: sigma2 must be positive");
    if (beta != 1 && beta != 2) throw InvalidInput("GaussianProfile: beta must be 1 or 2");
  }
};

inline cplx sample_gaussian_entry(const GaussianProfile& g, EntryRole role, Stream& rng) {
  if (role == EntryRole::Diagonal) return std::sqrt(g.sigma2) * rng.normal();
  if (g.beta == 1) return rng.normal();
  const double re = rng.normal();
  const double im = rng.normal();
  return cplx(re, im) / std::numbers::sqrt2;
}

/// Law of |X|: a half-normal of scale `core_scale` truncated to [0, t0] with
/// mass 1 - q, and above t0 the exact tail exp(-c t^alpha), q = exp(-c t0^alpha).
class ModulusLaw {
 public:
  ModulusLaw() = default;
  ModulusLaw(double alpha, double c, double t0, double core_scale)
      : alpha_(alpha), c_(c), t0_(t0), s_(core_scale), q_(std::exp(-c * std::pow(t0, alpha))) {}

  double alpha() const { return alpha_; }
  double rate() const { return c_; }
  double t0() const { return t0_; }
  double core_scale() const { return s_; }
  double tail_mass() const { return q_; }

  /// P(|X| > t), exact.
  double survival(double t) const {
    if (t < 0.0) return 1.0;
    if (t >= t0_) return std::exp(-c_ * std::pow(t, alpha_));
    const double full = boost::math::erf(t0_ / (s_ * std::numbers::sqrt2));
    const double part = boost::math::erf(t / (s_ * std::numbers::sqrt2));
    return q_ + (1.0 - q_) * (full - part) / full;
  }

  double sample(Stream& rng) const {
    if (rng.uniform() < q_) return std::pow(std::pow(t0_, alpha_) + rng.exponential() / c_, 1.0 / alpha_);
    const double full = boost::math::erf(t0_ / (s_ * std::numbers::sqrt2));
    const double y = s_ * std::numbers::sqrt2 * boost::math::erf_inv(rng.uniform() * full);
    return std::min(y, t0_);
  }

  static double tail_second_moment(double alpha, double c, double t0) {
    const double x0 = c * std::pow(t0, alpha);
    return t0 * t0 * std::exp(-x0) +
           2.0 / alpha * std::pow(c, -2.0 / alpha) * boost::math::tgamma(2.0 / alpha, x0);
  }

  /// E Y^2 for Y half-normal of scale s truncated to [0, t0].
  static double core_second_moment(double s, double t0) {
    const double z = t0 / s;
    if (z < 1e-3) return t0 * t0 / 3.0 - 2.0 / 45.0 * std::pow(t0, 4) / (s * s);
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    const double half_mass = 0.5 * boost::math::erf(z / std::numbers::sqrt2);
    return s * s * (1.0 - z * phi / half_mass);
  }

  double second_moment() const {
    return (1.0 - q_) * core_second_moment(s_, t0_) + tail_second_moment(alpha_, c_, t0_);
  }

  /// E|X|^2 by adaptive quadrature of the two-piece density.
  double second_moment_quadrature() const {
    using boost::math::quadrature::exp_sinh;
    using boost::math::quadrature::gauss_kronrod;
    const double full = boost::math::erf(t0_ / (s_ * std::numbers::sqrt2));
    auto core = [&](double y) {
      const double u = y / s_;
      return y * y * (1.0 - q_) * 2.0 * std::exp(-0.5 * u * u) /
             (s_ * std::sqrt(2.0 * std::numbers::pi) * full);
    };
    auto tail = [&](double u) {
      const double t = t0_ + u;
      return t * t * c_ * alpha_ * std::pow(t, alpha_ - 1.0) * std::exp(-c_ * std::pow(t, alpha_));
    };
    const double m_core = gauss_kronrod<double, 61>::integrate(core, 0.0, t0_, 15, 1e-13);
    exp_sinh<double> es;
    const double m_tail = es.integrate(tail, 1e-13);
    return m_core + m_tail;
  }

 private:
  double alpha_ = 1.0;
  double c_ = 1.0;
  double t0_ = 2.0;
  double s_ = 1.0;
  double q_ = std::exp(-2.0);
};

namespace detail {

/// Smallest t0 on a fine grid (refined by bisection) for which the tail mass
/// leaves room for a unit-variance core.
inline double min_feasible_t0(double alpha, double c) {
  auto feasible = [&](double t0) {
    const double rest = 1.0 - ModulusLaw::tail_second_moment(alpha, c, t0);
    const double q = std::exp(-c * std::pow(t0, alpha));
    return rest >= 0.0 && rest < (1.0 - q) * t0 * t0 / 3.0;
  };
  double prev = 0.0;
  for (double t = 1e-3; t < 1e4; t *= 1.01) {
    if (feasible(t)) {
      double lo = prev, hi = t;
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
      }
      return hi;
    }
    prev = t;
  }
  return std::numeric_limits<double>::infinity();
}

inline double calibrate_core_scale(double alpha, double c, double t0) {
  const double q = std::exp(-c * std::pow(t0, alpha));
  const double target = (1.0 - ModulusLaw::tail_second_moment(alpha, c, t0)) / (1.0 - q);
  if (!(target > 0.0) || !(target < t0 * t0 / 3.0)) {
    const double t0_min = min_feasible_t0(alpha, c);
    throw CalibrationError("unit variance is infeasible at t0=" + std::to_string(t0) +
                               " (alpha=" + std::to_string(alpha) + ", c=" + std::to_string(c) +
                               "); minimal feasible t0 is " + std::to_string(t0_min),
                           t0_min);
  }
  double lo = 0.0, hi = 1e4 * t0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (ModulusLaw::core_second_moment(mid, t0) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Sampler for a TailProfile. Construction calibrates the off-diagonal core
/// (when requested) so that E|X_12|^2 = 1; the diagonal core keeps scale 1.
class WgEntryLaw {
 public:
  explicit WgEntryLaw(const TailProfile& profile) : profile_(profile) {
    profile.validate();
    diag_ = ModulusLaw(profile.alpha, profile.b, profile.t0, 1.0);
    double s = 1.0;
    if (profile.normalize_variance) s = detail::calibrate_core_scale(profile.alpha, profile.a, profile.t0);
    off_ = ModulusLaw(profile.alpha, profile.a, profile.t0, s);
    if (profile.normalize_variance) {
      const double m2 = off_.second_moment_quadrature();
      if (std::abs(m2 - 1.0) > 1e-6)
        throw CalibrationError("variance calibration missed: E|X|^2 = " + std::to_string(m2),
                               profile.t0);
    }
  }

  const TailProfile& profile() const { return profile_; }
  const ModulusLaw& modulus(EntryRole role) const {
    return role == EntryRole::Diagonal ? diag_ : off_;
  }

  cplx sample(EntryRole role, Stream& rng) const {
    const double r = modulus(role).sample(rng);
    switch (profile_.phase(role)) {
      case PhaseLaw::Sign: return rng.uniform() < 0.5 ? -r : r;
      case PhaseLaw::Circle: return std::polar(r, 2.0 * std::numbers::pi * rng.uniform());
      case PhaseLaw::Plus: return r;
    }
    return r;
  }

 private:
  TailProfile profile_;
  ModulusLaw diag_;
  ModulusLaw off_;
};

inline cplx sample_wg_entry(const WgEntryLaw& law, EntryRole role, Stream& rng) {
  return law.sample(role, rng);
}

struct TailCalibrationRow {
  double t = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t samples = 0;
  double p_hat = 0.0;
  double ratio = 0.0;     // -log p_hat / t^alpha
  double ratio_lo = 0.0;  // from the upper end of the Wilson interval
  double ratio_hi = 0.0;  // +inf with zero hits
  bool below_onset = false;
};

/// Empirical normalized log-tail -log P(|X|>t) / t^alpha on a grid, with
/// Wilson intervals. Work is split into fixed chunks with their own streams.
inline std::vector<TailCalibrationRow> tail_calibration_report(const WgEntryLaw& law,
                                                               EntryRole role,
                                                               std::uint64_t n_samples,
                                                               const std::vector<double>& t_grid,
                                                               std::uint64_t seed) {
  if (t_grid.empty()) throw InvalidInput("tail_calibration_report: empty t grid");
  if (n_samples == 0) throw InvalidInput("tail_calibration_report: n_samples must be positive");
  constexpr std::uint64_t kChunk = 1 << 16;
  const std::size_t chunks = static_cast<std::size_t>((n_samples + kChunk - 1) / kChunk);
  std::vector<std::vector<std::uint64_t>> counts(chunks, std::vector<std::uint64_t>(t_grid.size()));
  parallel_for(chunks, [&](std::size_t k) {
    Stream rng = Stream::derive(seed, domain::kCalibrate, k);
    const std::uint64_t begin = k * kChunk;
    const std::uint64_t end = std::min(n_samples, begin + kChunk);
    for (std::uint64_t i = begin; i < end; ++i) {
      const double m = std::abs(law.sample(role, rng));
      for (std::size_t g = 0; g < t_grid.size(); ++g)
        if (m > t_grid[g]) ++counts[k][g];
    }
  });
  const double alpha = law.profile().alpha;
  const double t0 = law.profile().t0;
  std::vector<TailCalibrationRow> rows;
  for (std::size_t g = 0; g < t_grid.size(); ++g) {
    TailCalibrationRow r;
    r.t = t_grid[g];
    r.samples = n_samples;
    for (const auto& c : counts) r.hits += c[g];
    r.p_hat = static_cast<double>(r.hits) / static_cast<double>(n_samples);
    r.below_onset = r.t < t0;
    const double scale = std::pow(r.t, alpha);
    const auto ci = wilson_interval(r.hits, n_samples);
    r.ratio = r.hits > 0 ? -std::log(r.p_hat) / scale : std::numeric_limits<double>::infinity();
    r.ratio_lo = -std::log(ci.hi) / scale;
    r.ratio_hi = ci.lo > 0.0 ? -std::log(ci.lo) / scale : std::numeric_limits<double>::infinity();
    rows.push_back(r);
  }
  return rows;
}

}  // namespace rmtldp
