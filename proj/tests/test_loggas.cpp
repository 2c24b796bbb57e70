#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "rmtldp/loggas.hpp"
#include "rmtldp/wigner.hpp"

using namespace rmtldp;

namespace {

Potential quadratic(double b, double beta = 1.0) {
  Potential v;
  v.b = b;
  v.alpha = 2.0;
  v.beta = beta;
  return v;
}

// m_p of directly sampled GOE matrices (off-diagonal variance 1, diagonal 2),
// whose eigenvalues follow the beta = 1 gas with V = x^2 / 4.
RunningStats goe_moment(std::size_t n, int p, int draws, std::uint64_t seed) {
  const EntrySource src = GaussianProfile{2.0, 1};
  RunningStats st;
  for (int r = 0; r < draws; ++r) {
    Stream rng = Stream::derive(seed, domain::kSample, r);
    st.add(moment(eigvals(assemble_wigner(n, src, rng).normalized).values, p));
  }
  return st;
}

}  // namespace

TEST(LogDensity, TwoParticleExample) {
  const std::vector<double> l{0.0, 1.0};
  EXPECT_DOUBLE_EQ(loggas_logdensity(l, quadratic(1.0, 2.0)), -2.0);
}

TEST(LogDensity, CollisionIsMinusInfinity) {
  const std::vector<double> l{0.3, 0.3, 1.0};
  EXPECT_EQ(loggas_logdensity(l, quadratic(1.0)), -std::numeric_limits<double>::infinity());
  const std::vector<double> bad{0.3, NAN};
  EXPECT_THROW(loggas_logdensity(bad, quadratic(1.0)), InvalidInput);
  EXPECT_THROW(loggas_logdensity(std::vector<double>{1.0}, quadratic(1.0)), InvalidInput);
}

TEST(LogDensity, PermutationInvariant) {
  Stream rng(1, 0);
  Potential v;
  v.alpha = 3.0;
  v.w = Remainder::Quadratic;
  v.c = 0.5;
  v.beta = 2.0;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> l(9);
    for (auto& x : l) x = rng.normal();
    const double base = loggas_logdensity(l, v);
    std::shuffle(l.begin(), l.end(), rng);
    EXPECT_NEAR(loggas_logdensity(l, v), base, 1e-12 * std::abs(base));
  }
}

TEST(LogDensity, IncrementalDeltaMatchesFullDifference) {
  Stream rng(2, 0);
  Potential v;
  v.alpha = 2.5;
  v.w = Remainder::Absolute;
  v.c = 1.0;
  std::vector<double> l(12);
  for (auto& x : l) x = rng.normal();
  for (std::size_t i = 0; i < l.size(); ++i) {
    auto moved = l;
    moved[i] += 0.3 * rng.normal();
    EXPECT_NEAR(log_density_delta(l, i, moved[i], v),
                loggas_logdensity(moved, v) - loggas_logdensity(l, v), 1e-10);
  }
}

TEST(PotentialRegistry, RejectsInvalid) {
  Potential v = quadratic(1.0);
  v.w = Remainder::Quadratic;
  EXPECT_THROW(v.validate(), InvalidInput);
  EXPECT_THROW(quadratic(0.0).validate(), InvalidInput);
  Potential low;
  low.alpha = 1.5;
  EXPECT_THROW(low.validate(), InvalidInput);
  EXPECT_THROW(remainder_from_string("log"), InvalidInput);
}

TEST(Mcmc, ZeroStepLeavesStateUnchanged) {
  GasState s = initial_state(quadratic(1.0), 8, Stream(3, 0));
  s.step = 0.0;
  const auto before = s.lambdas;
  s = mcmc_sweep(s, quadratic(1.0));
  EXPECT_EQ(s.lambdas, before);
  EXPECT_EQ(s.acceptance(), 1.0);
  EXPECT_EQ(s.sweep_count, 1u);
}

// Single-site Metropolis on N = 2 particles restricted to the grid {-1, 0, 1}:
// choose a site (prob 1/2) and one of the two other grid points (prob 1/2),
// accept with the sampler's acceptance rule applied to its incremental delta.
TEST(Mcmc, DetailedBalanceOnDiscreteToy) {
  const Potential v = quadratic(0.7, 2.0);
  const std::vector<double> grid{-1.0, 0.0, 1.0};
  std::vector<std::vector<double>> states;
  for (double a : grid)
    for (double b : grid)
      if (a != b) states.push_back({a, b});
  std::map<std::vector<double>, double> pi;
  double z = 0.0;
  for (const auto& s : states) z += pi[s] = std::exp(loggas_logdensity(s, v));
  for (auto& [s, w] : pi) w /= z;

  auto kernel = [&](const std::vector<double>& from, const std::vector<double>& to) {
    double k = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      if (from[1 - i] != to[1 - i] || from[i] == to[i]) continue;
      k += 0.5 * 0.5 * metropolis_acceptance(log_density_delta(from, i, to[i], v));
    }
    return k;
  };
  for (const auto& x : states)
    for (const auto& y : states) {
      if (x == y) continue;
      EXPECT_NEAR(pi[x] * kernel(x, y), pi[y] * kernel(y, x), 1e-12);
    }
}

TEST(Mcmc, BurnInTunesAcceptance) {
  const Potential v = quadratic(0.25);
  GasState s = initial_state(v, 16, Stream(4, 0));
  burn_in(s, v, 2000);
  for (int k = 0; k < 500; ++k) mcmc_sweep_inplace(s, v);
  EXPECT_GT(s.acceptance(), 0.25);
  EXPECT_LT(s.acceptance(), 0.55);
}

TEST(Moments, Examples) {
  EXPECT_DOUBLE_EQ(moment(std::vector<double>{1, 1, 1, 1}, 3), 1.0);
  std::vector<double> l(20, 0.1);
  l[4] = 5.0;
  l[11] = -4.0;
  EXPECT_EQ(truncation_count(20), 2u);
  EXPECT_NEAR(truncated_moment(l, 3), (125.0 - 64.0) / 20.0, 1e-12);
  // The remaining N - k coordinates carry the rest of the moment.
  const double rest = 18 * std::pow(0.1, 3) / 20.0;
  EXPECT_NEAR(moment(l, 3) - truncated_moment(l, 3), rest, 1e-13);
  EXPECT_THROW(truncated_moment(std::vector<double>{1, 2}, 3), InvalidInput);
}

TEST(EquilibriumMoment, ZerothMomentIsOne) {
  const auto e = estimate_equilibrium_moment(quadratic(0.25), 0, 64, 10, 1);
  EXPECT_EQ(e.estimate, 1.0);
  EXPECT_EQ(e.stderr_, 0.0);
}

TEST(EquilibriumMoment, SecondMomentMatchesGoe) {
  McmcOptions opt;
  opt.burn_in = 5000;
  opt.thin = 16;
  const auto e = estimate_equilibrium_moment(quadratic(0.25), 2, 64, 2000, 11, opt);
  const auto goe = goe_moment(64, 2, 2000, 12);
  const double se = std::hypot(e.stderr_, goe.stderr_of_mean());
  EXPECT_LE(std::abs(e.estimate - goe.mean()), 3.0 * se)
      << e.estimate << " vs " << goe.mean() << " se " << se;
  EXPECT_FALSE(e.flagged);
}

TEST(EquilibriumMoment, OddMomentOfEvenPotentialVanishes) {
  Potential v;
  v.alpha = 4.0;
  v.w = Remainder::Quadratic;
  v.c = 0.5;
  McmcOptions opt;
  opt.burn_in = 3000;
  opt.thin = 8;
  const auto e = estimate_equilibrium_moment(v, 3, 24, 2000, 13, opt);
  EXPECT_LE(std::abs(e.estimate), 3.0 * e.stderr_);
}

TEST(IidSampler, MatchesQuadratureVariance) {
  Potential v;
  v.alpha = 4.0;
  v.w = Remainder::Quadratic;
  v.c = 1.0;
  const IidSampler s(v, 10);
  Stream rng(5, 0);
  RunningStats st;
  for (int i = 0; i < 200000; ++i) st.add(s.sample(rng));
  EXPECT_NEAR(st.mean(), 0.0, 4.0 * st.stderr_of_mean());
  EXPECT_NEAR(st.variance(), s.stddev() * s.stddev(), 0.01 * s.stddev() * s.stddev());
  EXPECT_NEAR(IidSampler(quadratic(1.0), 32).stddev(), 0.125, 1e-10);
}

TEST(IidTruncatedTail, MatchesThreeFoldConvolution) {
  // V = x^2, N = 32: X ~ N(0, 1/64) and k = floor(ln 32) = 3.
  const double sd = 0.125, x = 5e-5, c = 32 * x;
  auto phi = [&](double u) { return std::exp(-0.5 * u * u / (sd * sd)) / (sd * std::sqrt(2 * M_PI)); };
  auto sf = [&](double u) { return 0.5 * boost::math::erfc(u / (sd * std::sqrt(2.0))); };
  using boost::math::quadrature::gauss_kronrod;
  auto inner = [&](double x1) {
    return gauss_kronrod<double, 61>::integrate(
        [&](double x2) { return phi(x2) * sf(std::cbrt(c - x1 * x1 * x1 - x2 * x2 * x2)); }, -8 * sd,
        8 * sd, 8, 1e-8);
  };
  const double oracle = gauss_kronrod<double, 61>::integrate(
      [&](double x1) { return phi(x1) * inner(x1); }, -8 * sd, 8 * sd, 8, 1e-8);
  const auto e = iid_truncated_tail(quadratic(1.0), 3, 32, x, 100000, 21);
  EXPECT_LE(std::abs(e.p_hat - oracle), 3.0 * std::sqrt(oracle * (1 - oracle) / 1e5))
      << e.p_hat << " vs " << oracle;
  EXPECT_TRUE(e.ci.contains(oracle) || std::abs(e.p_hat - oracle) < 3 * e.stderr_);
}

TEST(IidTruncatedTail, UnreachableThresholdGivesZeroWithCi) {
  const auto e = iid_truncated_tail(quadratic(1.0), 3, 32, 10.0, 1000, 22);
  EXPECT_EQ(e.hits, 0u);
  EXPECT_EQ(e.p_hat, 0.0);
  EXPECT_EQ(e.ci.lo, 0.0);
  EXPECT_GT(e.ci.hi, 0.0);
  EXPECT_THROW(iid_truncated_tail(quadratic(1.0), 3, 32, 0.0, 10, 1), InvalidInput);
}

TEST(IidTruncatedTail, MonotoneInThreshold) {
  double prev = 1.0;
  for (double x : {1e-5, 5e-5, 1e-4, 2e-4, 4e-4}) {
    const auto e = iid_truncated_tail(quadratic(1.0), 3, 32, x, 20000, 23);
    EXPECT_LE(e.p_hat, prev);
    prev = e.p_hat;
  }
}

TEST(Concentration, BoundArithmetic) {
  EXPECT_EQ(linear_statistic_bound(quadratic(1.0), 32, 0.0), 1.0);
  EXPECT_NEAR(linear_statistic_bound(quadratic(1.0), 32, 0.5), std::exp(-64.0), 1e-40);
  Potential quartic;
  quartic.alpha = 4.0;
  EXPECT_NEAR(linear_statistic_bound(quartic, 2, 1.0), std::exp(-4.0 / (8.0 * 4.0 * 27.0)), 1e-15);
}

TEST(Concentration, ProbeRespectsBoundAndDecreases) {
  McmcOptions opt;
  opt.burn_in = 2000;
  const auto rows =
      conckconv_probe(quadratic(1.0), LipschitzFn::ClippedIdentity, 32, {0.0, 0.01, 0.05, 0.5}, 2000, 31, opt);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].bound, 1.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_FALSE(rows[i].violated);
    if (i) {
      EXPECT_LE(rows[i].frequency, rows[i - 1].frequency);
    }
  }
  EXPECT_EQ(rows[3].hits, 0u);
  for (auto f : {LipschitzFn::ClippedAbs, LipschitzFn::Sine})
    EXPECT_EQ(lipschitz_from_string(to_string(f)), f);
}
