#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <charconv>
#include <numbers>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "loggas.hpp"
#include "matcore.hpp"
#include "randsrc.hpp"
#include "rng.hpp"
#include "wigner.hpp"

namespace rmtldp {

/// Value in [0, +inf].
class ExtendedReal {
 public:
  static ExtendedReal finite(double v) { return ExtendedReal(v, false); }
  static ExtendedReal infinity() { return ExtendedReal(0.0, true); }

  bool is_infinite() const { return infinite_; }
  double value() const {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }
  std::string to_string() const;

  friend bool operator==(const ExtendedReal&, const ExtendedReal&) = default;

 private:
  ExtendedReal(double v, bool inf) : value_(v), infinite_(inf) {}
  double value_;
  bool infinite_;
};

/// Shortest round-trip decimal form; "inf", "-inf" and "nan" spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string ExtendedReal::to_string() const { return infinite_ ? "inf" : format_double(value_); }

/// k-th Catalan number; throws when the value leaves uint64.
inline std::uint64_t catalan(int k) {
  if (k < 0) throw InvalidInput("catalan: k must be >= 0");
  unsigned __int128 c = 1;
  for (int i = 0; i < k; ++i) {
    c = c * (2 * (2 * static_cast<unsigned>(i) + 1)) / (static_cast<unsigned>(i) + 2);
    if (c > std::numeric_limits<std::uint64_t>::max())
      throw InvalidInput("catalan: C_" + std::to_string(k) + " overflows 64 bits");
  }
  return static_cast<std::uint64_t>(c);
}

/// p-th moment of the semicircle law: 0 for odd p, C_{p/2} for even p.
inline double semicircle_moment(int p) {
  if (p < 0) throw InvalidInput("semicircle_moment: p must be >= 0");
  return p % 2 ? 0.0 : static_cast<double>(catalan(p / 2));
}

enum class RateTheorem { BetaEnsemble, Gaussian, WignerNoGaussianTail, TruncatedMoment };

inline const char* to_string(RateTheorem t) {
  switch (t) {
    case RateTheorem::BetaEnsemble: return "beta_ensemble";
    case RateTheorem::Gaussian: return "gaussian";
    case RateTheorem::WignerNoGaussianTail: return "wigner_no_gaussian_tail";
    case RateTheorem::TruncatedMoment: return "truncated_moment";
  }
  return "?";
}

inline RateTheorem rate_theorem_from_string(const std::string& s) {
  for (auto t : {RateTheorem::BetaEnsemble, RateTheorem::Gaussian, RateTheorem::WignerNoGaussianTail,
                 RateTheorem::TruncatedMoment})
    if (s == to_string(t)) return t;
  throw InvalidInput("unknown rate theorem '" + s + "'");
}

struct TailRateParams {
  double cp = 1.0;
  double alpha = 1.0;
};

struct TruncatedRateParams {
  double b = 1.0;
  double alpha = 2.0;
};

struct RateSpec {
  RateTheorem theorem = RateTheorem::Gaussian;
  int p = 4;
  std::variant<Potential, GaussianProfile, TailRateParams, TruncatedRateParams> params = GaussianProfile{};
  double center = 2.0;

  void validate() const {
    switch (theorem) {
      case RateTheorem::BetaEnsemble: {
        const auto* v = std::get_if<Potential>(&params);
        if (!v) throw InvalidInput("RateSpec: beta_ensemble needs a potential");
        v->validate();
        if (!(p > v->alpha)) throw InvalidInput("RateSpec: beta_ensemble needs p > alpha");
        break;
      }
      case RateTheorem::Gaussian: {
        const auto* g = std::get_if<GaussianProfile>(&params);
        if (!g) throw InvalidInput("RateSpec: gaussian needs a Gaussian profile");
        g->validate();
        if (p < 3) throw InvalidInput("RateSpec: gaussian needs p >= 3");
        break;
      }
      case RateTheorem::WignerNoGaussianTail: {
        const auto* t = std::get_if<TailRateParams>(&params);
        if (!t) throw InvalidInput("RateSpec: wigner_no_gaussian_tail needs (c_p, alpha)");
        if (!(t->cp > 0.0) || !(t->alpha > 0.0 && t->alpha < 2.0))
          throw InvalidInput("RateSpec: need c_p > 0 and alpha in (0,2)");
        if (p < 3) throw InvalidInput("RateSpec: wigner_no_gaussian_tail needs p >= 3");
        break;
      }
      case RateTheorem::TruncatedMoment: {
        const auto* t = std::get_if<TruncatedRateParams>(&params);
        if (!t) throw InvalidInput("RateSpec: truncated_moment needs (b, alpha)");
        if (!(t->b > 0.0) || !(t->alpha >= 2.0)) throw InvalidInput("RateSpec: need b > 0 and alpha >= 2");
        if (!(p > t->alpha)) throw InvalidInput("RateSpec: truncated_moment needs p > alpha");
        break;
      }
    }
    if (!std::isfinite(center)) throw InvalidInput("RateSpec: center must be finite");
  }
};

inline RateSpec gaussian_rate_spec(const GaussianProfile& g, int p) {
  RateSpec s{RateTheorem::Gaussian, p, g, 0.0};
  s.center = semicircle_moment(p);
  s.validate();
  return s;
}

inline RateSpec wg_rate_spec(double cp, double alpha, int p) {
  RateSpec s{RateTheorem::WignerNoGaussianTail, p, TailRateParams{cp, alpha}, 0.0};
  s.center = semicircle_moment(p);
  s.validate();
  return s;
}

/// `equilibrium_moment` is the p-th moment of the equilibrium measure.
inline RateSpec beta_rate_spec(const Potential& v, int p, double equilibrium_moment) {
  RateSpec s{RateTheorem::BetaEnsemble, p, v, equilibrium_moment};
  s.validate();
  return s;
}

inline RateSpec truncated_rate_spec(double b, double alpha, int p) {
  RateSpec s{RateTheorem::TruncatedMoment, p, TruncatedRateParams{b, alpha}, 0.0};
  s.validate();
  return s;
}

/// Closed form of c_p, valid for alpha <= 1 and even p.
inline double wg_cp_closed_form(double alpha, double a, double b, int p) {
  if (!(alpha > 0.0 && alpha <= 1.0) || p % 2 != 0)
    throw Unsupported("c_p has a closed form only for alpha in (0,1] and even p");
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidInput("wg_cp_closed_form: a and b must be positive");
  return std::min(b, std::pow(2.0, -alpha / p) * a);
}

/// Bracket [min(b, a/2), min(b, 2^{-alpha/p} a)] for even p.
inline std::pair<double, double> wg_cp_bounds(double alpha, double a, double b, int p) {
  if (p % 2 != 0) throw Unsupported("c_p bounds are known for even p only");
  if (!(alpha > 0.0 && alpha < 2.0) || !(a > 0.0) || !(b > 0.0))
    throw InvalidInput("wg_cp_bounds: need alpha in (0,2), a > 0, b > 0");
  const double hi = std::min(b, std::pow(2.0, -alpha / p) * a);
  return {alpha <= 1.0 ? hi : std::min(b, a / 2.0), hi};
}

inline double speed_exponent(const RateSpec& s) {
  const double p = s.p;
  switch (s.theorem) {
    case RateTheorem::BetaEnsemble: return 1.0 + std::get<Potential>(s.params).alpha / p;
    case RateTheorem::Gaussian: return 1.0 + 2.0 / p;
    case RateTheorem::WignerNoGaussianTail:
      return std::get<TailRateParams>(s.params).alpha * (0.5 + 1.0 / p);
    case RateTheorem::TruncatedMoment: return 1.0 + std::get<TruncatedRateParams>(s.params).alpha / p;
  }
  return 0.0;
}

/// Leading coefficient and power of the rate above its center.
inline std::pair<double, double> rate_coefficient_and_power(const RateSpec& s) {
  const double p = s.p;
  switch (s.theorem) {
    case RateTheorem::BetaEnsemble: {
      const auto& v = std::get<Potential>(s.params);
      return {v.b, v.alpha / p};
    }
    case RateTheorem::Gaussian: {
      const auto& g = std::get<GaussianProfile>(s.params);
      return {0.5 * std::min(1.0 / g.sigma2, g.beta / 2.0), 2.0 / p};
    }
    case RateTheorem::WignerNoGaussianTail: return {std::get<TailRateParams>(s.params).cp, 2.0 / p};
    case RateTheorem::TruncatedMoment: {
      const auto& t = std::get<TruncatedRateParams>(s.params);
      return {t.b, t.alpha / p};
    }
  }
  return {0.0, 1.0};
}

/// Rate function J_p(x). Even p: +inf below the center. Odd p: symmetric in
/// |x - center| for beta-ensembles, in |x| for the Wigner models.
inline ExtendedReal rate_value(const RateSpec& s, double x) {
  const auto [coef, power] = rate_coefficient_and_power(s);
  if (std::isnan(x)) throw InvalidInput("rate_value: x is NaN");
  if (std::isinf(x)) return ExtendedReal::infinity();
  if (s.p % 2 == 0) {
    if (x < s.center) return ExtendedReal::infinity();
    return ExtendedReal::finite(coef * std::pow(x - s.center, power));
  }
  const double shift = s.theorem == RateTheorem::BetaEnsemble ? s.center : 0.0;
  return ExtendedReal::finite(coef * std::pow(std::abs(x - shift), power));
}

/// q(H) = (1/sigma^2) sum H_ii^2 + beta sum_{i<j} |H_ij|^2.
inline double gaussian_q(const HermMatrix& h, double sigma2, int beta) {
  if (!(sigma2 > 0.0)) throw InvalidInput("gaussian_q: sigma2 must be positive");
  if (beta != 1 && beta != 2) throw InvalidInput("gaussian_q: beta must be 1 or 2");
  if (h.beta() > beta) throw InvalidInput("gaussian_q: complex H in a real symmetric class");
  double diag = 0.0, off = 0.0;
  for (std::size_t i = 0; i < h.dim(); ++i) {
    diag += h.diag(i) * h.diag(i);
    for (std::size_t j = i + 1; j < h.dim(); ++j) off += std::norm(h(i, j));
  }
  return diag / sigma2 + beta * off;
}

/// phi(H) = <sigma_sc, x^p> + tr H^p.
inline double gaussian_phi(const HermMatrix& h, int p) {
  return semicircle_moment(p) + (h.dim() ? trace_power(h, p) : 0.0);
}

/// Hollow n x n matrix with constant off-diagonal entry lambda such that
/// m + tr H^p = s, where m is the center (the semicircle moment for even p).
/// Even p: lambda = ((s - m) / ((n-1)^p + (n-1)))^{1/p}.
/// Odd p:  lambda = sgn(s) (|s| / ((n-1)^p - (n-1)))^{1/p}, needs n >= 3.
inline HermMatrix defH_witness(std::size_t n, double s, int p, double m, int beta = 1) {
  if (n < 2) throw InvalidInput("defH_witness: n must be >= 2");
  if (p < 1) throw InvalidInput("defH_witness: p must be >= 1");
  const double k = static_cast<double>(n - 1);
  double lambda;
  if (p % 2 == 0) {
    if (s < m) throw InvalidInput("defH_witness: even p needs s >= center");
    lambda = std::pow((s - m) / (std::pow(k, p) + k), 1.0 / p);
  } else {
    if (n < 3) throw InvalidInput("defH_witness: odd p needs n >= 3");
    if (m != 0.0) throw InvalidInput("defH_witness: odd p is centered at 0");
    lambda = std::copysign(std::pow(std::abs(s) / (std::pow(k, p) - k), 1.0 / p), s);
  }
  HermMatrix h(n, beta);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) h.set(i, j, lambda);
  const double phi = m + trace_power(h, p);
  if (std::abs(phi - s) > 1e-10 * std::max(1.0, std::abs(s)))
    throw CertificateViolation("defH_witness: phi(H) = " + format_double(phi) + " misses s = " +
                               format_double(s));
  return h;
}

namespace detail {

/// Uniform draw from the Hilbert-Schmidt ball of radius r among k x k
/// Hermitian matrices of class beta, embedded top-left in an n x n matrix.
inline HermMatrix hs_ball_sample(std::size_t n, std::size_t k, int beta, double r, Stream& rng) {
  HermMatrix h(n, beta);
  // Orthonormal coordinates: diagonal entries, and sqrt(2) Re / sqrt(2) Im off it.
  const std::size_t dim = k + static_cast<std::size_t>(beta) * k * (k - 1) / 2;
  for (std::size_t i = 0; i < k; ++i) {
    h.set_diag(i, rng.normal());
    for (std::size_t j = i + 1; j < k; ++j) {
      const double re = rng.normal() / std::numbers::sqrt2;
      const double im = beta == 2 ? rng.normal() / std::numbers::sqrt2 : 0.0;
      h.set(i, j, cplx(re, im));
    }
  }
  const double norm = h.hs_norm();
  if (norm == 0.0) return h;
  const double radius = r * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
  return h * (radius / norm);
}

}  // namespace detail

/// Largest |tr_N(X_N + N^{1/p} H)^p - <sigma_sc, x^p> - tr H^p| over H = 0,
/// n_H random H with ||H||_2 <= r supported on a top-left block of size <= 8,
/// and the hollow all-off-diagonal witness with ||H||_2 = r.
inline double lemconv_discrepancy_for(const HermMatrix& xn, int p, double r, std::size_t n_h, Stream& rng) {
  const std::size_t n = xn.dim();
  if (n < 2) throw InvalidInput("lemconv_discrepancy: n must be >= 2");
  if (!(r >= 0.0)) throw InvalidInput("lemconv_discrepancy: r must be >= 0");
  const double nn = static_cast<double>(n);
  const double m = semicircle_moment(p);
  const double lift = std::pow(nn, 1.0 / p);
  auto discrepancy = [&](const HermMatrix& h) {
    return std::abs(trace_power(xn + lift * h, p) / nn - m - trace_power(h, p));
  };
  double worst = discrepancy(HermMatrix(n, xn.beta()));
  if (r == 0.0) return worst;
  for (std::size_t t = 0; t < n_h; ++t) {
    const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(std::min<std::size_t>(8, n)));
    worst = std::max(worst, discrepancy(detail::hs_ball_sample(n, k, xn.beta(), r, rng)));
  }
  HermMatrix hollow(n, xn.beta());
  const double lambda = r / std::sqrt(nn * (nn - 1.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) hollow.set(i, j, lambda);
  return std::max(worst, discrepancy(hollow));
}

inline double lemconv_discrepancy(std::size_t n, int p, double r, std::size_t n_h, const EntrySource& src,
                                  Stream& rng) {
  const auto w = assemble_wigner(n, src, rng);
  return lemconv_discrepancy_for(w.normalized, p, r, n_h, rng);
}

}  // namespace rmtldp
