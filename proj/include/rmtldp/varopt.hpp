#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "matcore.hpp"
#include "parallel.hpp"
#include "randsrc.hpp"
#include "rng.hpp"

namespace rmtldp {

/// I(A) = b sum |A_ii|^alpha + a sum_{i<j} |A_ij|^alpha.
inline double cost_I(const HermMatrix& m, double a, double b, double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw InvalidInput("cost_I: alpha must lie in (0,2)");
  double diag = 0.0, off = 0.0;
  for (std::size_t i = 0; i < m.dim(); ++i) {
    if (m.diag(i) != 0.0) diag += std::pow(std::abs(m.diag(i)), alpha);
    for (std::size_t j = i + 1; j < m.dim(); ++j) {
      const double r = std::abs(m(i, j));
      if (r != 0.0) off += std::pow(r, alpha);
    }
  }
  return b * diag + a * off;
}

/// sum_{i,j} |A_ij|^alpha - sum_i |lambda_i|^alpha, nonnegative for alpha in (0,2).
inline double zhan_gap(const HermMatrix& m, double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw InvalidInput("zhan_gap: alpha must lie in (0,2)");
  double entries = 0.0;
  for (std::size_t i = 0; i < m.dim(); ++i)
    for (std::size_t j = 0; j < m.dim(); ++j) {
      const double r = std::abs(m(i, j));
      if (r != 0.0) entries += std::pow(r, alpha);
    }
  double spectral = 0.0;
  for (double l : eigvals(m).values)
    if (l != 0.0) spectral += std::pow(std::abs(l), alpha);
  return entries - spectral;
}

struct SupportEntry {
  std::size_t i = 0, j = 0;
  double value = 0.0;
};

/// Real symmetric candidate given by its upper-triangle support.
struct SparseHermCandidate {
  std::size_t n = 0;
  std::vector<SupportEntry> support;
  double cost = 0.0;
  double constraint = 0.0;

  HermMatrix to_matrix() const {
    HermMatrix m(n, 1);
    for (const auto& e : support) m.set(e.i, e.j, e.value);
    return m;
  }
};

inline double candidate_cost(const SparseHermCandidate& c, double a, double b, double alpha) {
  double s = 0.0;
  for (const auto& e : c.support) s += (e.i == e.j ? b : a) * std::pow(std::abs(e.value), alpha);
  return s;
}

struct CpOptions {
  std::size_t n_max = 6;
  std::size_t budget = 256;  // random restarts
  std::uint64_t seed = 0;
  PhaseLaw phase_diag = PhaseLaw::Sign;
  PhaseLaw phase_offdiag = PhaseLaw::Sign;
};

struct CpResult {
  double alpha = 1.0, a = 1.0, b = 1.0;
  int p = 4;
  double value = 0.0;
  SparseHermCandidate argmin;
  double lo = 0.0, hi = 0.0;  // bracket, even p only
  bool bracket_checked = false;
  std::size_t restarts = 0;
};

namespace detail {

constexpr std::size_t kMaxSupport = 6;
constexpr double kEntryFloor = 1e-8;

/// Dense real symmetric matrix power helpers for the small search space.
struct SmallSym {
  std::size_t n;
  std::vector<double> v;
  explicit SmallSym(std::size_t n_) : n(n_), v(n_ * n_, 0.0) {}
  double& at(std::size_t i, std::size_t j) { return v[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return v[i * n + j]; }
};

inline SmallSym mul(const SmallSym& x, const SmallSym& y) {
  SmallSym z(x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t k = 0; k < x.n; ++k) {
      const double xik = x.at(i, k);
      if (xik == 0.0) continue;
      for (std::size_t j = 0; j < x.n; ++j) z.at(i, j) += xik * y.at(k, j);
    }
  return z;
}

class SupportProblem {
 public:
  SupportProblem(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> pos, double a, double b,
                 double alpha, int p)
      : n_(n), pos_(std::move(pos)), a_(a), b_(b), alpha_(alpha), p_(p) {}

  double cost(const std::vector<double>& x) const {
    double s = 0.0;
    for (std::size_t e = 0; e < x.size(); ++e) s += weight(e) * std::pow(std::abs(x[e]), alpha_);
    return s;
  }

  /// tr A^p and its gradient with respect to the support values.
  double constraint(const std::vector<double>& x, std::vector<double>* grad) const {
    SmallSym m(n_);
    for (std::size_t e = 0; e < x.size(); ++e) {
      m.at(pos_[e].first, pos_[e].second) = x[e];
      m.at(pos_[e].second, pos_[e].first) = x[e];
    }
    SmallSym pw = m;  // A^{p-1}
    for (int k = 2; k < p_; ++k) pw = mul(pw, m);
    double tr = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) tr += pw.at(i, j) * m.at(j, i);
    if (grad) {
      grad->assign(x.size(), 0.0);
      for (std::size_t e = 0; e < x.size(); ++e) {
        const auto [i, j] = pos_[e];
        (*grad)[e] = (i == j ? 1.0 : 2.0) * p_ * pw.at(i, j);
      }
    }
    return tr;
  }

  /// Rescales x onto tr A^p = 1; false when tr A^p <= 0.
  bool project(std::vector<double>& x) const {
    const double g = constraint(x, nullptr);
    if (!(g > 0.0) || !std::isfinite(g)) return false;
    const double s = std::pow(g, -1.0 / p_);
    for (auto& v : x) v *= s;
    return true;
  }

  /// Scale-invariant objective log I - (alpha/p) log tr A^p.
  double objective(const std::vector<double>& x) const {
    const double g = constraint(x, nullptr);
    if (!(g > 0.0)) return std::numeric_limits<double>::infinity();
    return std::log(cost(x)) - alpha_ / p_ * std::log(g);
  }

  std::vector<double> gradient(const std::vector<double>& x) const {
    std::vector<double> dg;
    const double g = constraint(x, &dg);
    const double f = cost(x);
    std::vector<double> out(x.size());
    for (std::size_t e = 0; e < x.size(); ++e) {
      const double r = std::abs(x[e]);
      const double df = weight(e) * alpha_ * std::pow(r, alpha_ - 1.0) * (x[e] < 0.0 ? -1.0 : 1.0);
      out[e] = df / f - alpha_ / p_ * dg[e] / g;
    }
    return out;
  }

  SparseHermCandidate candidate(const std::vector<double>& x) const {
    SparseHermCandidate c;
    c.n = n_;
    for (std::size_t e = 0; e < x.size(); ++e)
      if (x[e] != 0.0) c.support.push_back({pos_[e].first, pos_[e].second, x[e]});
    c.cost = cost(x);
    c.constraint = constraint(x, nullptr);
    return c;
  }

  const std::vector<std::pair<std::size_t, std::size_t>>& positions() const { return pos_; }

 private:
  double weight(std::size_t e) const { return pos_[e].first == pos_[e].second ? b_ : a_; }

  std::size_t n_;
  std::vector<std::pair<std::size_t, std::size_t>> pos_;
  double a_, b_, alpha_;
  int p_;
};

inline void apply_floor(std::vector<double>& x, double scale) {
  for (auto& v : x)
    if (std::abs(v) < kEntryFloor * scale) v = std::copysign(kEntryFloor * scale, v == 0.0 ? 1.0 : v);
}

/// Projected gradient descent on one support; returns false if never feasible.
inline bool descend(const SupportProblem& prob, std::vector<double>& x, int iterations = 400) {
  if (!prob.project(x)) return false;
  apply_floor(x, 1.0);
  if (!prob.project(x)) return false;
  double fx = prob.objective(x);
  double step = 0.1;
  for (int it = 0; it < iterations; ++it) {
    const auto g = prob.gradient(x);
    double gn = 0.0;
    for (double v : g) gn += v * v;
    gn = std::sqrt(gn);
    if (!(gn > 1e-14) || !std::isfinite(gn)) break;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      std::vector<double> y = x;
      for (std::size_t e = 0; e < y.size(); ++e) y[e] -= step * g[e] / gn;
      apply_floor(y, 1.0);
      const double fy = prob.objective(y);
      if (fy < fx - 1e-4 * step * gn) {
        if (!prob.project(y)) break;
        x = std::move(y);
        fx = fy;
        step = std::min(step * 2.0, 1.0);
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return prob.project(x);
}

/// Drops entries sitting at the floor and rescales onto the constraint.
inline SparseHermCandidate finish(const SupportProblem& prob, std::vector<double> x) {
  double top = 0.0;
  for (double v : x) top = std::max(top, std::abs(v));
  std::vector<double> pruned = x;
  for (auto& v : pruned)
    if (std::abs(v) <= 1e-6 * top) v = 0.0;
  if (pruned != x && prob.project(pruned)) {
    auto c = prob.candidate(pruned);
    if (std::abs(c.constraint - 1.0) < 1e-9) return c;
  }
  return prob.candidate(x);
}

inline std::vector<std::pair<std::size_t, std::size_t>> random_support(std::size_t dim, Stream& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = i; j < dim; ++j) all.emplace_back(i, j);
  const std::size_t size = 1 + static_cast<std::size_t>(rng.uniform() * std::min(kMaxSupport, all.size()));
  for (std::size_t k = 0; k < size; ++k) {
    const std::size_t r = k + static_cast<std::size_t>(rng.uniform() * (all.size() - k));
    std::swap(all[k], all[std::min(r, all.size() - 1)]);
  }
  all.resize(size);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace detail

/// Numerical c_p = inf{ I(A) : tr A^p = 1 } over real symmetric matrices with
/// signs, combining the spike and pair candidates with restarted projected
/// gradient descent on random supports of size <= 6.
inline CpResult solve_cp(double alpha, double a, double b, int p, const CpOptions& opt = {}) {
  if (p < 3) throw InvalidInput("solve_cp: p must be >= 3");
  if (!(alpha > 0.0 && alpha < 2.0)) throw InvalidInput("solve_cp: alpha must lie in (0,2)");
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidInput("solve_cp: a and b must be positive");
  if (opt.n_max < 2) throw InvalidInput("solve_cp: n_max must be >= 2");
  if (opt.phase_diag == PhaseLaw::Plus || opt.phase_offdiag == PhaseLaw::Plus)
    throw Unsupported("solve_cp: phase laws without full support are not supported");

  CpResult res;
  res.alpha = alpha;
  res.a = a;
  res.b = b;
  res.p = p;
  res.restarts = opt.budget;

  // Spike A_11 = 1, cost b.
  res.argmin = SparseHermCandidate{1, {{0, 0, 1.0}}, b, 1.0};
  res.value = b;
  // Pair A_12 = 2^{-1/p}, cost a 2^{-alpha/p}; tr A^p vanishes for odd p.
  if (p % 2 == 0) {
    const double h = std::pow(2.0, -1.0 / p);
    const double c = a * std::pow(h, alpha);
    if (c < res.value) {
      res.argmin = SparseHermCandidate{2, {{0, 1, h}}, c, 1.0};
      res.value = c;
    }
  }

  std::vector<SparseHermCandidate> found(opt.budget);
  std::vector<char> ok(opt.budget, 0);
  parallel_for(opt.budget, [&](std::size_t r) {
    Stream rng = Stream::derive(opt.seed, domain::kVaropt, r);
    const std::size_t dim = 1 + static_cast<std::size_t>(rng.uniform() * opt.n_max);
    detail::SupportProblem prob(std::min(dim, opt.n_max), detail::random_support(std::min(dim, opt.n_max), rng),
                                a, b, alpha, p);
    std::vector<double> x(prob.positions().size());
    for (auto& v : x) v = rng.normal();
    if (!detail::descend(prob, x)) return;
    found[r] = detail::finish(prob, std::move(x));
    ok[r] = std::abs(found[r].constraint - 1.0) < 1e-9;
  });
  for (std::size_t r = 0; r < opt.budget; ++r)
    if (ok[r] && found[r].cost < res.value) {
      res.value = found[r].cost;
      res.argmin = found[r];
    }

  if (p % 2 == 0) {
    res.lo = std::min(b, a / 2.0);
    res.hi = std::min(b, std::pow(2.0, -alpha / p) * a);
    res.bracket_checked = true;
    if (res.value < res.lo - 1e-6 || res.value > res.hi + 1e-6)
      throw CertificateViolation("solve_cp: value " + std::to_string(res.value) + " outside [" +
                                 std::to_string(res.lo) + ", " + std::to_string(res.hi) + "]");
  }
  return res;
}

/// phi(lambda) = (1 - 2^{1/p-1}) |sum lambda_i| + 2^{1/p-1} sum |lambda_i|.
inline double inner_phi(const std::vector<double>& lambda, int p) {
  const double c = std::pow(2.0, 1.0 / p - 1.0);
  double s = 0.0, l1 = 0.0;
  for (double v : lambda) {
    s += v;
    l1 += std::abs(v);
  }
  return (1.0 - c) * std::abs(s) + c * l1;
}

/// inf of phi on the l^p unit sphere over vectors with k coordinates equal to
/// u > 0 and l equal to -v < 0, k + l <= m_max. Along the constraint phi is
/// concave in v on each side of the zero-sum point, so the minimum over each
/// (k, l) sits at v = 0, at the zero-sum point, or at u = 0.
inline double inner_phi_inf(int p, int m_max) {
  if (p < 4 || p % 2 != 0) throw InvalidInput("inner_phi_inf: p must be even and >= 4");
  if (m_max < 1 || m_max > 6) throw InvalidInput("inner_phi_inf: m_max must lie in [1,6]");
  auto eval = [p](int k, int l, double v) {
    const double u = std::pow(std::max(0.0, (1.0 - l * std::pow(v, p)) / k), 1.0 / p);
    std::vector<double> lam(k, u);
    lam.insert(lam.end(), l, -v);
    return inner_phi(lam, p);
  };
  double best = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= m_max; ++k)
    for (int l = 0; k + l <= m_max; ++l) {
      best = std::min(best, eval(k, l, 0.0));
      if (l == 0) continue;
      const double vmax = std::pow(1.0 / l, 1.0 / p);
      best = std::min(best, eval(k, l, vmax));
      // k u(v) - l v decreases from positive to negative on [0, vmax].
      double lo = 0.0, hi = vmax;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double u = std::pow(std::max(0.0, (1.0 - l * std::pow(mid, p)) / k), 1.0 / p);
        (k * u - l * mid > 0.0 ? lo : hi) = mid;
      }
      best = std::min(best, eval(k, l, 0.5 * (lo + hi)));
    }
  return best;
}

}  // namespace rmtldp
