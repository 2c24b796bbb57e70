#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rmtldp/matcore.hpp"
#include "test_support.hpp"

using namespace rmtldp;
using rmtldp::testing::product_trace_power;
using rmtldp::testing::random_herm;

namespace {

// Characteristic polynomial coefficients c[0..n] (c[n] = 1) of a real
// symmetric matrix by the Faddeev-LeVerrier recursion.
std::vector<double> charpoly(const std::vector<double>& a, std::size_t n) {
  std::vector<double> c(n + 1, 0.0);
  c[n] = 1.0;
  std::vector<double> m(n * n, 0.0), am(n * n);
  for (std::size_t k = 1; k <= n; ++k) {
    for (std::size_t i = 0; i < n; ++i) m[i * n + i] += c[n - k + 1];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < n; ++l) s += a[i * n + l] * m[l * n + j];
        am[i * n + j] = s;
      }
    double tr = 0.0;
    for (std::size_t i = 0; i < n; ++i) tr += am[i * n + i];
    c[n - k] = -tr / static_cast<double>(k);
    m = am;
  }
  return c;
}

double horner(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) v = v * x + c[k];
  return v;
}

// Real roots of the characteristic polynomial: sign changes on a fine grid
// over the Gershgorin disc, refined by bisection.
std::vector<double> charpoly_roots(const std::vector<double>& a, std::size_t n) {
  const auto c = charpoly(a, n);
  double radius = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += std::abs(a[i * n + j]);
    radius = std::max(radius, r);
  }
  radius *= 1.01;
  const int grid = 200000;
  std::vector<double> roots;
  double x0 = -radius, f0 = horner(c, x0);
  for (int g = 1; g <= grid; ++g) {
    const double x1 = -radius + 2.0 * radius * g / grid;
    const double f1 = horner(c, x1);
    if ((f0 < 0) != (f1 < 0)) {
      double lo = x0, hi = x1, flo = f0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = horner(c, mid);
        if ((fm < 0) == (flo < 0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    x0 = x1;
    f0 = f1;
  }
  return roots;
}

}  // namespace

TEST(HermMatrix, StoresUpperTriangleAndConjugates) {
  HermMatrix m(3, 2);
  m.set(0, 2, cplx(1.0, 2.0));
  EXPECT_EQ(m(2, 0), cplx(1.0, -2.0));
  m.set(2, 1, cplx(0.5, 0.5));
  EXPECT_EQ(m(1, 2), cplx(0.5, -0.5));
}

TEST(HermMatrix, RejectsWritesThatBreakSymmetry) {
  HermMatrix real(2, 1);
  EXPECT_THROW(real.set(0, 1, cplx(0.0, 1.0)), InvalidInput);
  HermMatrix herm(2, 2);
  EXPECT_THROW(herm.set(1, 1, cplx(1.0, 1.0)), InvalidInput);
  EXPECT_THROW(herm.set(2, 0, 1.0), InvalidInput);
  EXPECT_THROW(HermMatrix(2, 3), InvalidInput);
}

TEST(Eigvals, Identity) {
  const auto s = eigvals(HermMatrix::identity(5));
  ASSERT_EQ(s.size(), 5u);
  for (double v : s.values) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(Eigvals, SwapMatrix) {
  HermMatrix m(2, 1);
  m.set(0, 1, 1.0);
  const auto s = eigvals(m);
  EXPECT_NEAR(s.values[0], -1.0, 1e-15);
  EXPECT_NEAR(s.values[1], 1.0, 1e-15);
}

TEST(Eigvals, OneByOneAndEmptyAreTrivial) {
  const double v[] = {-3.5};
  EXPECT_EQ(eigvals(HermMatrix::diagonal(v)).values, std::vector<double>{-3.5});
  EXPECT_TRUE(eigvals(HermMatrix(0, 1)).values.empty());
}

TEST(Eigvals, MatchesCharacteristicPolynomialRoots) {
  Stream rng(2024, 1);
  for (int rep = 0; rep < 5; ++rep) {
    const auto a = random_herm(8, 1, rng);
    const auto roots = charpoly_roots(a.dense<double>(), 8);
    ASSERT_EQ(roots.size(), 8u);
    const auto s = eigvals(a);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(s.values[i], roots[i], 1e-8);
  }
}

TEST(Eigvals, NonFiniteEntriesAreRejected) {
  HermMatrix m(3, 1);
  m.set(0, 1, std::numeric_limits<double>::quiet_NaN());
  EXPECT_THROW(eigvals(m), InvalidInput);
  m.set(0, 1, std::numeric_limits<double>::infinity());
  EXPECT_THROW(eigvals_jacobi(m), InvalidInput);
}

TEST(Eigvals, ThreeRoutesAgree) {
  Stream rng(7, 3);
  for (int beta : {1, 2}) {
    for (std::size_t n : {1u, 2u, 3u, 7u, 20u, 33u}) {
      const auto a = random_herm(n, beta, rng);
      const auto ql = eigvals(a);
      const auto jac = eigvals_jacobi(a);
      const auto emb = eigvals_embedded(a);
      ASSERT_EQ(ql.size(), n);
      ASSERT_EQ(jac.size(), n);
      ASSERT_EQ(emb.size(), n);
      ASSERT_TRUE(std::is_sorted(ql.values.begin(), ql.values.end()));
      const double tol = 1e-10 * (1.0 + opnorm(ql));
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(ql.values[i], jac.values[i], tol) << "beta=" << beta << " n=" << n;
        EXPECT_NEAR(ql.values[i], emb.values[i], tol) << "beta=" << beta << " n=" << n;
      }
    }
  }
}

TEST(Eigvals, EmbeddingDoublesEverySpectralValue) {
  Stream rng(11, 0);
  const auto a = random_herm(6, 2, rng);
  const auto doubled = jacobi_eigen(real_embedding(a), 12).values;
  const auto direct = eigvals(a);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_NEAR(doubled[2 * k], direct.values[k], 1e-10);
    EXPECT_NEAR(doubled[2 * k + 1], direct.values[k], 1e-10);
  }
}

TEST(Eigvals, ReconstructionResidual) {
  Stream rng(5, 5);
  for (int beta : {1, 2}) {
    const auto a = random_herm(24, beta, rng);
    EXPECT_LE(reconstruction_residual(a), 1e-10 * (1.0 + opnorm(a)));
  }
}

TEST(Eigvals, SumEqualsTrace) {
  Stream rng(99, 1);
  for (int beta : {1, 2})
    for (std::size_t n : {5u, 40u, 128u}) {
      const auto a = random_herm(n, beta, rng);
      const auto s = eigvals(a);
      const double sum = std::accumulate(s.values.begin(), s.values.end(), 0.0);
      EXPECT_NEAR(sum, a.trace(), 1e-9 * static_cast<double>(n) * (1.0 + a.max_abs_entry()));
    }
}

TEST(TracePower, Examples) {
  EXPECT_NEAR(trace_power(HermMatrix::identity(7), 3), 7.0, 1e-13);
  HermMatrix swap(2, 1);
  swap.set(0, 1, 1.0);
  EXPECT_NEAR(trace_power(swap, 4), 2.0, 1e-13);
  EXPECT_THROW(trace_power(swap, 0), InvalidInput);
}

TEST(TracePower, SixBySixFifthPowerMatchesProduct) {
  Stream rng(6, 6);
  const auto a = random_herm(6, 1, rng);
  const double direct = product_trace_power(a, 5);
  EXPECT_NEAR(trace_power(a, 5), direct, 1e-8 * std::abs(direct));
}

TEST(TracePower, AgreesWithProductTraceUpToN64P8) {
  Stream rng(3, 9);
  for (int beta : {1, 2})
    for (std::size_t n : {2u, 9u, 31u, 64u})
      for (int p = 1; p <= 8; ++p) {
        const auto a = random_herm(n, beta, rng, 1.0 / std::sqrt(static_cast<double>(n)));
        const double direct = product_trace_power(a, p);
        // Odd powers can nearly cancel; scale by sum |lambda|^p instead.
        const double scale = std::pow(schatten_norm(a, p), p);
        EXPECT_NEAR(trace_power(a, p), direct, 1e-8 * std::max(1e-300, scale))
            << "beta=" << beta << " n=" << n << " p=" << p;
      }
}

TEST(NormalizedTracePower, Examples) {
  EXPECT_NEAR(normalized_trace_power(HermMatrix::identity(4), 2), 1.0, 1e-15);
  EXPECT_EQ(normalized_trace_power(HermMatrix(5, 1), 3), 0.0);
  HermMatrix swap(2, 1);
  swap.set(0, 1, 1.0);
  EXPECT_NEAR(normalized_trace_power(swap, 2), 1.0, 1e-15);
}

TEST(Schatten, Examples) {
  EXPECT_NEAR(schatten_norm(HermMatrix::identity(3), 2.0), std::sqrt(3.0), 1e-14);
  const double d[] = {3.0, -4.0};
  const auto m = HermMatrix::diagonal(d);
  EXPECT_NEAR(schatten_norm(m, 1.0), 7.0, 1e-14);
  EXPECT_NEAR(opnorm(m), 4.0, 1e-14);
  EXPECT_THROW(schatten_norm(m, 0.5), InvalidInput);
}

TEST(Schatten, TriangleInequality) {
  Stream rng(17, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 10);
    const int beta = trial % 2 + 1;
    const double q = 1.0 + 4.0 * rng.uniform();
    const auto a = random_herm(n, beta, rng);
    const auto b = random_herm(n, beta, rng, 3.0 * rng.uniform());
    EXPECT_LE(schatten_norm(a + b, q), (schatten_norm(a, q) + schatten_norm(b, q)) * (1.0 + 1e-12));
  }
}

TEST(NumericalRank, CountsNonzeroModes) {
  Stream rng(1, 1);
  EXPECT_EQ(numerical_rank(eigvals(HermMatrix(4, 1))), 0u);
  for (std::size_t r = 1; r <= 3; ++r)
    EXPECT_EQ(numerical_rank(eigvals(rmtldp::testing::random_low_rank(12, r, 2, rng))), r);
}

// |tr(A+B)^p - tr A^p - tr B^p| <= 2^p max_k (tr|A|^{p+1})^{k/(p+1)} (tr B^2)^{(p-k)/2}
TEST(TraceExpansion, HolderBoundOnCrossTerms) {
  Stream rng(41, 2);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 15);
    const int beta = trial % 2 + 1;
    const int p = 3 + trial % 5;
    const auto a = random_herm(n, beta, rng, 0.2 + rng.uniform());
    const auto b = random_herm(n, beta, rng, 0.2 + 2.0 * rng.uniform());
    const auto sa = eigvals(a);
    const double lhs = std::abs(trace_power(a + b, p) - trace_power(sa, p) - trace_power(b, p));
    const double abs_a = std::pow(schatten_norm(sa, p + 1.0), p + 1.0);
    const double hs_b2 = b.hs_norm() * b.hs_norm();
    double rhs = 0.0;
    for (int k = 1; k <= p - 1; ++k)
      rhs = std::max(rhs, std::pow(abs_a, k / (p + 1.0)) * std::pow(hs_b2, (p - k) / 2.0));
    rhs *= std::pow(2.0, p);
    EXPECT_LE(lhs, rhs * (1.0 + 1e-9)) << "n=" << n << " p=" << p;
  }
}
