#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "errors.hpp"

namespace rmtldp {

using cplx = std::complex<double>;

/// Real symmetric (beta = 1) or complex Hermitian (beta = 2) matrix.
///
/// Only the upper triangle is stored (row-major, packed), so the Hermitian
/// relation A(j,i) = conj(A(i,j)) holds by construction. Writes through set()
/// reject anything that would leave the symmetry class: a non-real diagonal,
/// or a non-real entry in a beta = 1 matrix.
class HermMatrix {
 public:
  HermMatrix() = default;
  HermMatrix(std::size_t n, int beta) : n_(n), beta_(beta), data_(n * (n + 1) / 2) {
    if (beta != 1 && beta != 2) throw InvalidInput("HermMatrix: beta must be 1 or 2");
  }

  static HermMatrix identity(std::size_t n, int beta = 1) {
    HermMatrix m(n, beta);
    for (std::size_t i = 0; i < n; ++i) m.set_diag(i, 1.0);
    return m;
  }

  static HermMatrix diagonal(std::span<const double> values, int beta = 1) {
    HermMatrix m(values.size(), beta);
    for (std::size_t i = 0; i < values.size(); ++i) m.set_diag(i, values[i]);
    return m;
  }

  std::size_t dim() const { return n_; }
  int beta() const { return beta_; }

  cplx operator()(std::size_t i, std::size_t j) const {
    return i <= j ? data_[index(i, j)] : std::conj(data_[index(j, i)]);
  }
  double diag(std::size_t i) const { return data_[index(i, i)].real(); }

  void set(std::size_t i, std::size_t j, cplx v) {
    if (i >= n_ || j >= n_) throw InvalidInput("HermMatrix::set: index out of range");
    if (i == j && v.imag() != 0.0) throw InvalidInput("HermMatrix::set: diagonal must be real");
    if (beta_ == 1 && v.imag() != 0.0)
      throw InvalidInput("HermMatrix::set: real symmetric matrix takes real entries");
    if (i <= j)
      data_[index(i, j)] = v;
    else
      data_[index(j, i)] = std::conj(v);
  }
  void set_diag(std::size_t i, double v) { set(i, i, v); }

  /// Upper triangle, row by row: (0,0), (0,1), ..., (0,n-1), (1,1), ...
  std::span<const cplx> packed() const { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](cplx z) {
      return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
  }

  double max_abs_entry() const {
    double m = 0.0;
    for (const auto& z : data_) m = std::max(m, std::abs(z));
    return m;
  }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < n_; ++i) t += diag(i);
    return t;
  }

  /// Hilbert-Schmidt norm (sqrt of the sum of |A_ij|^2 over both triangles).
  double hs_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i; j < n_; ++j) s += (i == j ? 1.0 : 2.0) * std::norm((*this)(i, j));
    return std::sqrt(s);
  }

  HermMatrix& operator+=(const HermMatrix& o) {
    check_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  HermMatrix& operator-=(const HermMatrix& o) {
    check_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  HermMatrix& operator*=(double s) {
    for (auto& z : data_) z *= s;
    return *this;
  }
  friend HermMatrix operator+(HermMatrix a, const HermMatrix& b) { return a += b; }
  friend HermMatrix operator-(HermMatrix a, const HermMatrix& b) { return a -= b; }
  friend HermMatrix operator*(HermMatrix a, double s) { return a *= s; }
  friend HermMatrix operator*(double s, HermMatrix a) { return a *= s; }
  friend bool operator==(const HermMatrix&, const HermMatrix&) = default;

  /// Full row-major copy; T is double for beta = 1, cplx otherwise.
  template <typename T>
  std::vector<T> dense() const {
    std::vector<T> out(n_ * n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) {
        if constexpr (std::is_same_v<T, double>)
          out[i * n_ + j] = (*this)(i, j).real();
        else
          out[i * n_ + j] = (*this)(i, j);
      }
    return out;
  }

 private:
  std::size_t index(std::size_t i, std::size_t j) const { return i * (2 * n_ - i + 1) / 2 + (j - i); }
  void check_same_shape(const HermMatrix& o) const {
    if (o.n_ != n_ || o.beta_ != beta_) throw InvalidInput("HermMatrix: shape or class mismatch");
  }

  std::size_t n_ = 0;
  int beta_ = 1;
  std::vector<cplx> data_;
};

/// Eigenvalues sorted ascending.
struct Spectrum {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double min() const { return values.front(); }
  double max() const { return values.back(); }
};

namespace detail {

template <typename T>
inline T mul(T a, T b) {
  if constexpr (std::is_same_v<T, cplx>)
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
  else
    return a * b;
}
template <typename T>
inline T conj_of(T a) {
  if constexpr (std::is_same_v<T, cplx>)
    return {a.real(), -a.imag()};
  else
    return a;
}
template <typename T>
inline double abs2(T a) {
  if constexpr (std::is_same_v<T, cplx>)
    return a.real() * a.real() + a.imag() * a.imag();
  else
    return a * a;
}
template <typename T>
inline double real_of(T a) {
  if constexpr (std::is_same_v<T, cplx>)
    return a.real();
  else
    return a;
}

/// Householder reduction of a dense Hermitian matrix (row-major, destroyed)
/// to a real symmetric tridiagonal (d, e). For complex input the subdiagonal
/// phases are dropped: a diagonal unitary similarity makes them real without
/// changing the spectrum.
template <typename T>
void tridiagonalize(std::vector<T>& a, std::size_t n, std::vector<double>& d, std::vector<double>& e) {
  d.assign(n, 0.0);
  e.assign(n > 0 ? n - 1 : 0, 0.0);
  std::vector<T> v(n), w(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    d[k] = real_of(a[k * n + k]);
    double xnorm2 = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) xnorm2 += abs2(a[i * n + k]);
    const double xnorm = std::sqrt(xnorm2);
    if (xnorm == 0.0) continue;
    const T x0 = a[(k + 1) * n + k];
    const double ax0 = std::abs(x0);
    const T phase = ax0 > 0.0 ? x0 / ax0 : T(1.0);
    const T alpha = -phase * xnorm;
    for (std::size_t i = k + 1; i < n; ++i) v[i] = a[i * n + k];
    v[k + 1] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) vnorm2 += abs2(v[i]);
    e[k] = xnorm;
    if (vnorm2 == 0.0) continue;
    const double tau = 2.0 / vnorm2;
    for (std::size_t i = k + 1; i < n; ++i) {
      T s{};
      const T* row = &a[i * n];
      for (std::size_t j = k + 1; j < n; ++j) s += mul(row[j], v[j]);
      w[i] = tau * s;
    }
    T vw{};
    for (std::size_t i = k + 1; i < n; ++i) vw += mul(conj_of(v[i]), w[i]);
    const double half_k = 0.5 * tau * real_of(vw);
    for (std::size_t i = k + 1; i < n; ++i) w[i] -= half_k * v[i];
    for (std::size_t i = k + 1; i < n; ++i) {
      T* row = &a[i * n];
      const T vi = v[i];
      const T wi = w[i];
      for (std::size_t j = k + 1; j < n; ++j) row[j] -= mul(vi, conj_of(w[j])) + mul(wi, conj_of(v[j]));
    }
  }
  if (n >= 2) {
    d[n - 2] = real_of(a[(n - 2) * n + (n - 2)]);
    e[n - 2] = std::abs(a[(n - 1) * n + (n - 2)]);
  }
  if (n >= 1) d[n - 1] = real_of(a[(n - 1) * n + (n - 1)]);
}

/// Implicit QL with Wilkinson-type shifts on a symmetric tridiagonal matrix.
/// d holds the diagonal, e[i] couples i and i+1. Eigenvalues land in d (unsorted).
inline void tridiagonal_ql(std::vector<double>& d, std::vector<double> e) {
  const std::size_t n = d.size();
  if (n < 2) return;
  e.resize(n, 0.0);
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m = l;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= eps * dd) break;
      }
      if (m != l) {
        if (++iter > 200) throw std::runtime_error("tridiagonal_ql: no convergence");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (std::size_t ii = m; ii-- > l;) {
          const double f = s * e[ii];
          const double b = c * e[ii];
          r = std::hypot(f, g);
          e[ii + 1] = r;
          if (r == 0.0) {
            d[ii + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[ii + 1] - p;
          r = (d[ii] - g) * s + 2.0 * c * b;
          p = s * r;
          d[ii + 1] = g + p;
          g = c * r - b;
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

inline void require_finite(const HermMatrix& a) {
  if (!a.all_finite()) throw InvalidInput("eigvals: matrix has non-finite entries");
}

}  // namespace detail

/// All eigenvalues, ascending: Householder tridiagonalization then implicit QL.
/// Runs in real arithmetic for beta = 1 and complex arithmetic for beta = 2.
inline Spectrum eigvals(const HermMatrix& a) {
  detail::require_finite(a);
  const std::size_t n = a.dim();
  std::vector<double> d, e;
  if (a.beta() == 1) {
    auto dense = a.dense<double>();
    detail::tridiagonalize(dense, n, d, e);
  } else {
    auto dense = a.dense<cplx>();
    detail::tridiagonalize(dense, n, d, e);
  }
  detail::tridiagonal_ql(d, e);
  std::sort(d.begin(), d.end());
  return {std::move(d)};
}

/// Eigen-decomposition of a dense real symmetric matrix (row-major) by cyclic
/// Jacobi rotations. vectors is row-major with eigenvectors in columns,
/// matching the order of values (ascending).
struct SymmetricEigen {
  std::vector<double> values;
  std::vector<double> vectors;
  std::size_t n = 0;
};

inline SymmetricEigen jacobi_eigen(std::vector<double> a, std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  double frob2 = 0.0;
  for (double x : a) frob2 += x * x;
  const double tol2 = 1e-28 * frob2;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off <= tol2) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::hypot(t, 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        a[p * n + q] = a[q * n + p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a[x * n + x] < a[y * n + y]; });
  SymmetricEigen out;
  out.n = n;
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a[order[c] * n + order[c]];
    for (std::size_t r = 0; r < n; ++r) out.vectors[r * n + c] = v[r * n + order[c]];
  }
  return out;
}

/// The 2n x 2n real symmetric matrix [[Re A, -Im A], [Im A, Re A]]. Each
/// eigenvalue of A appears twice in its spectrum.
inline std::vector<double> real_embedding(const HermMatrix& a) {
  const std::size_t n = a.dim();
  const std::size_t m = 2 * n;
  std::vector<double> out(m * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const cplx z = a(i, j);
      out[i * m + j] = z.real();
      out[(i + n) * m + (j + n)] = z.real();
      out[i * m + (j + n)] = -z.imag();
      out[(i + n) * m + j] = z.imag();
    }
  return out;
}

/// Collapses a doubled spectrum (sorted) back to one copy per pair.
inline std::vector<double> deduplicate_pairs(std::vector<double> doubled) {
  std::sort(doubled.begin(), doubled.end());
  std::vector<double> out;
  out.reserve(doubled.size() / 2);
  for (std::size_t k = 0; k + 1 < doubled.size(); k += 2) out.push_back(0.5 * (doubled[k] + doubled[k + 1]));
  return out;
}

/// Jacobi route: direct for beta = 1, through the real embedding for beta = 2.
inline Spectrum eigvals_jacobi(const HermMatrix& a) {
  detail::require_finite(a);
  if (a.beta() == 1) return {jacobi_eigen(a.dense<double>(), a.dim()).values};
  return {deduplicate_pairs(jacobi_eigen(real_embedding(a), 2 * a.dim()).values)};
}

/// Tridiagonal-QL route through the real embedding (any beta).
inline Spectrum eigvals_embedded(const HermMatrix& a) {
  detail::require_finite(a);
  const std::size_t m = 2 * a.dim();
  auto dense = real_embedding(a);
  std::vector<double> d, e;
  detail::tridiagonalize(dense, m, d, e);
  detail::tridiagonal_ql(d, e);
  return {deduplicate_pairs(std::move(d))};
}

/// max |A - Q diag(values) Q^*| from a Jacobi decomposition (diagnostic only).
inline double reconstruction_residual(const HermMatrix& a) {
  detail::require_finite(a);
  const bool complex = a.beta() == 2;
  const std::size_t m = complex ? 2 * a.dim() : a.dim();
  const auto target = complex ? real_embedding(a) : a.dense<double>();
  const auto eig = jacobi_eigen(target, m);
  double worst = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) s += eig.vectors[i * m + k] * eig.values[k] * eig.vectors[j * m + k];
      worst = std::max(worst, std::abs(target[i * m + j] - s));
    }
  return worst;
}

inline double ipow(double x, int p) {
  double r = 1.0;
  for (int k = 0; k < p; ++k) r *= x;
  return r;
}

inline double trace_power(const Spectrum& s, int p) {
  if (p < 1) throw InvalidInput("trace_power: p must be >= 1");
  double t = 0.0;
  for (double l : s.values) t += ipow(l, p);
  return t;
}

/// tr A^p = sum of lambda_i^p.
inline double trace_power(const HermMatrix& a, int p) { return trace_power(eigvals(a), p); }

namespace detail {

template <typename T>
std::vector<T> dense_matmul(const std::vector<T>& x, const std::vector<T>& y, std::size_t n) {
  std::vector<T> z(n * n, T(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const T xik = x[i * n + k];
      T* zi = &z[i * n];
      const T* yk = &y[k * n];
      for (std::size_t j = 0; j < n; ++j) zi[j] += mul(xik, yk[j]);
    }
  return z;
}

template <typename T>
double trace_power_products(const HermMatrix& a, int p) {
  const std::size_t n = a.dim();
  const auto base = a.dense<T>();
  // A^h with h = floor(p/2); even p: tr A^p = ||A^h||_F^2, odd: tr(A^h A^{h+1}).
  auto half = base;
  for (int k = 1; k < p / 2; ++k) half = dense_matmul(half, base, n);
  double t = 0.0;
  if (p % 2 == 0) {
    for (const auto& v : half) t += abs2(v);
    return t;
  }
  if (p == 1) return a.trace();
  const auto next = dense_matmul(half, base, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) t += real_of(mul(half[i * n + j], next[j * n + i]));
  return t;
}

}  // namespace detail

/// tr A^p by repeated products, no eigensolver. Cheaper than the spectral
/// route for small p.
inline double trace_power_direct(const HermMatrix& a, int p) {
  if (p < 1) throw InvalidInput("trace_power_direct: p must be >= 1");
  return a.beta() == 1 ? detail::trace_power_products<double>(a, p) : detail::trace_power_products<cplx>(a, p);
}

inline double normalized_trace_power(const HermMatrix& a, int p) {
  return trace_power(a, p) / static_cast<double>(a.dim());
}

inline double schatten_norm(const Spectrum& s, double q) {
  if (!(q >= 1.0)) throw InvalidInput("schatten_norm: q must be >= 1");
  double t = 0.0;
  for (double l : s.values) t += std::pow(std::abs(l), q);
  return std::pow(t, 1.0 / q);
}
inline double schatten_norm(const HermMatrix& a, double q) { return schatten_norm(eigvals(a), q); }

inline double opnorm(const Spectrum& s) {
  return s.values.empty() ? 0.0 : std::max(std::abs(s.min()), std::abs(s.max()));
}
inline double opnorm(const HermMatrix& a) { return opnorm(eigvals(a)); }

/// Number of eigenvalues above rel_tol * opnorm in absolute value.
inline std::size_t numerical_rank(const Spectrum& s, double rel_tol = 1e-10) {
  const double cut = rel_tol * opnorm(s);
  return static_cast<std::size_t>(
      std::count_if(s.values.begin(), s.values.end(), [&](double l) { return std::abs(l) > cut; }));
}

}  // namespace rmtldp
