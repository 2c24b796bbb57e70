#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <variant>

#include "errors.hpp"
#include "matcore.hpp"
#include "randsrc.hpp"
#include "rng.hpp"

namespace rmtldp {

/// Entry source for a Wigner matrix.
using EntrySource = std::variant<GaussianProfile, WgEntryLaw>;

inline int source_beta(const EntrySource& src) {
  if (const auto* g = std::get_if<GaussianProfile>(&src)) return g->beta;
  return std::get<WgEntryLaw>(src).profile().beta();
}

inline cplx sample_entry(const EntrySource& src, EntryRole role, Stream& rng) {
  if (const auto* g = std::get_if<GaussianProfile>(&src)) return sample_gaussian_entry(*g, role, rng);
  return std::get<WgEntryLaw>(src).sample(role, rng);
}

struct WignerDraw {
  HermMatrix raw;
  HermMatrix normalized;  // raw / sqrt(n)
};

/// X_N = X / sqrt(N), with every entry scaled the same way the truncation
/// split scales its parts, so the split reassembles bit-exactly.
inline HermMatrix normalize_wigner(const HermMatrix& raw) {
  return raw * (1.0 / std::sqrt(static_cast<double>(raw.dim())));
}

/// Fills the upper triangle row by row, (0,0), (0,1), ..., from one stream.
inline HermMatrix sample_raw_wigner(std::size_t n, const EntrySource& src, Stream& rng) {
  HermMatrix x(n, source_beta(src));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      x.set(i, j, sample_entry(src, i == j ? EntryRole::Diagonal : EntryRole::OffDiagonal, rng));
  return x;
}

inline WignerDraw assemble_wigner(std::size_t n, const EntrySource& src, Stream& rng) {
  if (n < 2) throw InvalidInput("assemble_wigner: n must be >= 2");
  auto raw = sample_raw_wigner(n, src, rng);
  auto normalized = normalize_wigner(raw);
  return {std::move(raw), std::move(normalized)};
}

/// Four-way split of X_N by the magnitude of the raw entries:
///   A: |X_ij| <= L,  B: L < |X_ij| < eps M,  C: eps M <= |X_ij| <= M / eps,
///   D: |X_ij| > M / eps,  with L = (ln N)^d and M = N^{1/2 + 1/p}.
struct TruncationSplit {
  HermMatrix A, B, C, D;
  double eps = 0.1;
  double d = 2.5;
  int p = 4;
  double small_cut = 0.0;  // L
  double large_lo = 0.0;   // eps M
  double large_hi = 0.0;   // M / eps
};

inline double default_log_power(double alpha) { return 2.0 / alpha + 0.5; }

inline TruncationSplit truncation_split(const HermMatrix& raw, double eps, double d, int p,
                                        double alpha) {
  const std::size_t n = raw.dim();
  if (n < 3) throw InvalidInput("truncation_split: n must be >= 3");
  if (!(eps > 0.0 && eps <= 1.0)) throw InvalidInput("truncation_split: eps must lie in (0,1]");
  if (!(alpha * d > 1.0)) throw InvalidInput("truncation_split: alpha * d must exceed 1");
  if (p < 1) throw InvalidInput("truncation_split: p must be >= 1");

  const double nn = static_cast<double>(n);
  const double scale = 1.0 / std::sqrt(nn);
  const double big = std::pow(nn, 0.5 + 1.0 / p);
  TruncationSplit s{HermMatrix(n, raw.beta()), HermMatrix(n, raw.beta()), HermMatrix(n, raw.beta()),
                    HermMatrix(n, raw.beta()), eps, d, p, std::pow(std::log(nn), d), eps * big,
                    big / eps};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const cplx x = raw(i, j);
      const double m = std::abs(x);
      HermMatrix* part;
      if (m <= s.small_cut)
        part = &s.A;
      else if (m < s.large_lo)
        part = &s.B;
      else if (m <= s.large_hi)
        part = &s.C;
      else
        part = &s.D;
      part->set(i, j, x * scale);
    }
  return s;
}

/// Number of ordered pairs (i, j) with a nonzero entry.
inline std::size_t count_nonzero(const HermMatrix& c) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < c.dim(); ++i)
    for (std::size_t j = i; j < c.dim(); ++j)
      if (c(i, j) != cplx(0.0)) count += i == j ? 1 : 2;
  return count;
}

enum class PlantShape { DiagSpike, OffdiagPair };

inline const char* to_string(PlantShape s) {
  return s == PlantShape::DiagSpike ? "diag_spike" : "offdiag_pair";
}

inline PlantShape plant_shape_from_string(const std::string& s) {
  if (s == "diag_spike") return PlantShape::DiagSpike;
  if (s == "offdiag_pair") return PlantShape::OffdiagPair;
  throw InvalidInput("unknown plant shape '" + s + "'");
}

struct PlantSpec {
  PlantShape shape = PlantShape::DiagSpike;
  double delta = 1.0;
  int p = 4;

  void validate() const {
    if (!(delta > 0.0)) throw InvalidInput("PlantSpec: delta must be positive");
    if (p < 3) throw InvalidInput("PlantSpec: p must be >= 3");
  }
};

/// theta_N = (N delta)^{1/p} for the spike, (N delta / 2)^{1/p} for the pair.
inline double plant_height(const PlantSpec& spec, std::size_t n) {
  const double nd = static_cast<double>(n) * spec.delta;
  return std::pow(spec.shape == PlantShape::DiagSpike ? nd : nd / 2.0, 1.0 / spec.p);
}

/// Replaces entry (0,0), or the pair (0,1)/(1,0), with theta_N.
inline HermMatrix plant_deformation(const HermMatrix& xn, const PlantSpec& spec) {
  spec.validate();
  HermMatrix out = xn;
  const double theta = plant_height(spec, xn.dim());
  if (spec.shape == PlantShape::DiagSpike) {
    if (xn.dim() < 1) throw InvalidInput("plant_deformation: empty matrix");
    out.set_diag(0, theta);
  } else {
    if (xn.dim() < 2) throw InvalidInput("plant_deformation: offdiag_pair needs n >= 2");
    out.set(0, 1, theta);
  }
  return out;
}

struct DecompotraceResult {
  double lhs = 0.0;
  double rhs = 0.0;
  std::size_t rank = 0;
  bool ok = true;
};

/// |tr(H+C)^p - tr H^p - tr C^p| against 2^p r max_{1<=k<=p-1} ||H||^k ||C||^{p-k},
/// r the numerical rank of C.
inline DecompotraceResult decompotrace_check(const HermMatrix& h, const HermMatrix& c, int p) {
  if (p < 2) throw InvalidInput("decompotrace_check: p must be >= 2");
  const auto sh = eigvals(h);
  const auto sc = eigvals(c);
  DecompotraceResult r;
  r.lhs = std::abs(trace_power(h + c, p) - trace_power(sh, p) - trace_power(sc, p));
  r.rank = numerical_rank(sc, 1e-10);
  const double nh = opnorm(sh), nc = opnorm(sc);
  double m = 0.0;
  for (int k = 1; k <= p - 1; ++k) m = std::max(m, ipow(nh, k) * ipow(nc, p - k));
  r.rhs = std::ldexp(1.0, p) * static_cast<double>(r.rank) * m;
  r.ok = r.lhs <= r.rhs * (1.0 + 1e-9);
  return r;
}

/// CDF of the semicircle law on [-2, 2].
inline double semicircle_cdf(double x) {
  if (x <= -2.0) return 0.0;
  if (x >= 2.0) return 1.0;
  return 0.5 + x * std::sqrt(4.0 - x * x) / (4.0 * std::numbers::pi) + std::asin(x / 2.0) / std::numbers::pi;
}

}  // namespace rmtldp
