#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rmtldp/rates.hpp"
#include "rmtldp/stats.hpp"
#include "test_support.hpp"

using namespace rmtldp;
using rmtldp::testing::random_herm;

namespace {

std::uint64_t binomial(unsigned n, unsigned k) {
  std::uint64_t b = 1;
  for (unsigned i = 0; i < k; ++i) b = b * (n - i) / (i + 1);
  return b;
}

RateSpec gaussian_spec(double sigma2, int beta, int p) { return gaussian_rate_spec(GaussianProfile{sigma2, beta}, p); }

}  // namespace

TEST(Catalan, SmallValues) {
  EXPECT_EQ(catalan(0), 1u);
  EXPECT_EQ(catalan(1), 1u);
  EXPECT_EQ(catalan(2), 2u);
  EXPECT_EQ(catalan(3), 5u);
}

TEST(Catalan, MatchesCentralBinomialUpTo30) {
  for (int k = 0; k <= 30; ++k) EXPECT_EQ(catalan(k), binomial(2 * k, k) / (k + 1)) << k;
}

TEST(Catalan, OverflowIsReported) {
  EXPECT_NO_THROW(catalan(36));
  EXPECT_THROW(catalan(37), InvalidInput);
  EXPECT_THROW(catalan(-1), InvalidInput);
}

TEST(SemicircleMoment, MatchesQuadrature) {
  EXPECT_EQ(semicircle_moment(3), 0.0);
  for (int p : {2, 4, 6, 8}) {
    // x = 2 sin t removes the square-root endpoint behaviour.
    auto f = [p](double t) {
      const double c = 2.0 * std::cos(t);
      return c * c * std::pow(2.0 * std::sin(t), p) / (2.0 * std::numbers::pi);
    };
    const double h = std::numbers::pi / 2.0;
    const double q = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -h, h, 10, 1e-13);
    EXPECT_NEAR(semicircle_moment(p), q, 1e-10) << p;
  }
}

TEST(SpeedExponent, PerTheorem) {
  EXPECT_DOUBLE_EQ(speed_exponent(gaussian_spec(1.0, 2, 4)), 1.5);
  EXPECT_DOUBLE_EQ(speed_exponent(wg_rate_spec(1.0, 1.0, 4)), 0.75);
  EXPECT_DOUBLE_EQ(speed_exponent(beta_rate_spec(Potential{1.0, 2.0}, 4, 0.5)), 1.5);
  EXPECT_DOUBLE_EQ(speed_exponent(truncated_rate_spec(1.0, 2.0, 3)), 1.0 + 2.0 / 3.0);
}

TEST(RateSpec, RejectsBadOrders) {
  EXPECT_THROW(gaussian_spec(1.0, 1, 2), InvalidInput);
  EXPECT_THROW(wg_rate_spec(1.0, 1.0, 2), InvalidInput);
  EXPECT_THROW(beta_rate_spec(Potential{1.0, 4.0}, 4, 0.0), InvalidInput);
  EXPECT_THROW(truncated_rate_spec(1.0, 2.0, 2), InvalidInput);
  RateSpec mismatched{RateTheorem::Gaussian, 4, TailRateParams{}, 2.0};
  EXPECT_THROW(mismatched.validate(), InvalidInput);
}

TEST(RateValue, ClosedFormExamples) {
  EXPECT_DOUBLE_EQ(rate_value(gaussian_spec(1.0, 2, 4), 3.0).value(), 0.5);
  EXPECT_TRUE(rate_value(gaussian_spec(1.0, 2, 4), 1.0).is_infinite());

  const double c4 = wg_cp_closed_form(1.0, 1.0, 1.0, 4);
  EXPECT_NEAR(c4, std::pow(2.0, -0.25), 1e-15);
  EXPECT_NEAR(rate_value(wg_rate_spec(c4, 1.0, 4), 3.0).value(), 0.8408964152537145, 1e-12);

  const double m = 0.37;
  EXPECT_DOUBLE_EQ(rate_value(beta_rate_spec(Potential{1.0, 2.0}, 4, m), m + 1.0).value(), 1.0);
}

TEST(RateValue, OddOrderCenters) {
  // Beta-ensembles are symmetric about their center, the Wigner models about 0.
  const auto be = beta_rate_spec(Potential{2.0, 2.0}, 3, 0.25);
  EXPECT_DOUBLE_EQ(rate_value(be, 0.25).value(), 0.0);
  EXPECT_DOUBLE_EQ(rate_value(be, 1.25).value(), rate_value(be, -0.75).value());
  const auto g = gaussian_spec(1.0, 1, 3);
  EXPECT_DOUBLE_EQ(rate_value(g, 0.0).value(), 0.0);
  EXPECT_DOUBLE_EQ(rate_value(g, 2.0).value(), rate_value(g, -2.0).value());
  EXPECT_DOUBLE_EQ(rate_value(g, 8.0).value(), 0.25 * std::pow(8.0, 2.0 / 3.0));
  const auto t = truncated_rate_spec(1.5, 2.0, 3);
  EXPECT_DOUBLE_EQ(rate_value(t, -8.0).value(), 1.5 * std::pow(8.0, 2.0 / 3.0));
}

TEST(RateValue, NonnegativeWithZeroAtCenterOnGrid) {
  const std::vector<RateSpec> specs = {gaussian_spec(1.0, 1, 4), gaussian_spec(0.5, 2, 6),
                                       wg_rate_spec(0.7, 1.3, 4), beta_rate_spec(Potential{1.0, 2.0}, 4, 0.5),
                                       truncated_rate_spec(1.0, 3.0, 4)};
  for (const auto& s : specs) {
    EXPECT_EQ(rate_value(s, s.center).value(), 0.0);
    for (double u = -5.0; u <= 5.0; u += 0.01) {
      const auto r = rate_value(s, s.center + u);
      if (r.is_infinite()) {
        EXPECT_LT(u, 0.0);
        continue;
      }
      EXPECT_GE(r.value(), 0.0);
      if (u != 0.0) {
        EXPECT_GT(r.value(), 0.0);
      }
    }
  }
}

TEST(RateValue, LowerSemicontinuousAtCenter) {
  // The only discontinuity for even p is the jump to +inf just below the center.
  const auto s = gaussian_spec(1.0, 1, 4);
  const double at = rate_value(s, s.center).value();
  for (double h = 1e-1; h > 1e-12; h /= 10.0) {
    EXPECT_GE(rate_value(s, s.center - h).value(), at);
    EXPECT_GE(rate_value(s, s.center + h).value(), at);
  }
}

TEST(RateValue, LogLogSlopeRecoversExponent) {
  struct Case {
    RateSpec spec;
    double expected;
  };
  const std::vector<Case> cases = {{beta_rate_spec(Potential{1.0, 2.0}, 4, 0.5), 2.0 / 4},
                                   {beta_rate_spec(Potential{1.0, 3.0}, 6, 0.1), 3.0 / 6},
                                   {gaussian_spec(1.0, 2, 4), 2.0 / 4},
                                   {gaussian_spec(2.0, 1, 6), 2.0 / 6},
                                   {wg_rate_spec(0.8, 1.0, 4), 2.0 / 4},
                                   {wg_rate_spec(0.8, 1.5, 8), 2.0 / 8}};
  for (const auto& c : cases) {
    const double u1 = 0.5, u2 = 7.0;
    const double slope = (std::log(rate_value(c.spec, c.spec.center + u2).value()) -
                          std::log(rate_value(c.spec, c.spec.center + u1).value())) /
                         (std::log(u2) - std::log(u1));
    EXPECT_NEAR(slope, c.expected, 1e-9);
  }
}

TEST(RateValue, LinearInB) {
  const auto one = beta_rate_spec(Potential{1.0, 2.0}, 4, 0.5);
  const auto two = beta_rate_spec(Potential{2.0, 2.0}, 4, 0.5);
  for (double x = 0.5; x < 6.0; x += 0.25)
    EXPECT_NEAR(rate_value(two, x).value(), 2.0 * rate_value(one, x).value(), 1e-14);
}

TEST(RateValue, InfinityFormatting) {
  EXPECT_EQ(ExtendedReal::infinity().to_string(), "inf");
  EXPECT_EQ(ExtendedReal::finite(0.5).to_string(), "0.5");
}

TEST(WgCp, ClosedFormAndBounds) {
  EXPECT_DOUBLE_EQ(wg_cp_closed_form(1.0, 4.0, 0.5, 4), 0.5);
  EXPECT_THROW(wg_cp_closed_form(1.5, 1.0, 1.0, 4), Unsupported);
  EXPECT_THROW(wg_cp_closed_form(1.0, 1.0, 1.0, 3), Unsupported);
  const auto [lo, hi] = wg_cp_bounds(1.5, 1.0, 1.0, 4);
  EXPECT_DOUBLE_EQ(lo, 0.5);
  EXPECT_DOUBLE_EQ(hi, std::pow(2.0, -1.5 / 4));
}

TEST(GaussianForm, ZeroMatrix) {
  HermMatrix h(5, 1);
  EXPECT_EQ(gaussian_q(h, 1.0, 1), 0.0);
  EXPECT_EQ(gaussian_phi(h, 4), 2.0);
  EXPECT_EQ(gaussian_phi(h, 5), 0.0);
}

TEST(GaussianForm, SingleOffDiagonalEntry) {
  HermMatrix h(2, 1);
  h.set(0, 1, 1.7);
  EXPECT_DOUBLE_EQ(gaussian_q(h, 1.0, 1), 1.7 * 1.7);
  EXPECT_DOUBLE_EQ(gaussian_q(h, 1.0, 2), 2.0 * 1.7 * 1.7);
  HermMatrix c(2, 2);
  EXPECT_THROW(gaussian_q(c, 1.0, 1), InvalidInput);
}

TEST(GaussianForm, QDominatesTracePower) {
  Stream rng = Stream::derive(11, domain::kSample, 0);
  for (int t = 0; t < 500; ++t) {
    const int beta = 1 + t % 2;
    const double sigma2 = 0.25 + 2.0 * rng.uniform();
    const int p = 3 + t % 5;
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 7);
    const auto h = random_herm(n, beta, rng, 0.1 + 3.0 * rng.uniform());
    const double lower = std::min(1.0 / sigma2, beta / 2.0) * std::pow(std::abs(trace_power(h, p)), 2.0 / p);
    EXPECT_GE(gaussian_q(h, sigma2, beta), lower * (1.0 - 1e-12)) << t;
  }
}

TEST(DefHWitness, TwoByTwoSpectrum) {
  const auto h = defH_witness(2, 2.0 + 0.5, 4, 2.0);
  const auto s = eigvals(h);
  const double lambda = h(0, 1).real();
  EXPECT_NEAR(s.min(), -lambda, 1e-15);
  EXPECT_NEAR(s.max(), lambda, 1e-15);
  EXPECT_NEAR(trace_power(h, 4), 2.0 * std::pow(lambda, 4), 1e-14);
  EXPECT_NEAR(lambda, std::pow(0.25, 0.25), 1e-15);
}

TEST(DefHWitness, QApproachesLimit) {
  const double m = semicircle_moment(4);
  const auto h = defH_witness(200, m + 1.0, 4, m);
  const double limit = 0.5 * std::pow(1.0, 2.0 / 4);
  EXPECT_NEAR(gaussian_q(h, 1.0, 1) / limit, 1.0, 0.02);
  // The exact q for this witness, computed by hand.
  const double lambda = std::pow(1.0 / (std::pow(199.0, 4) + 199.0), 0.25);
  EXPECT_NEAR(gaussian_q(h, 1.0, 1), 200.0 * 199.0 / 2.0 * lambda * lambda, 1e-12);
}

TEST(DefHWitness, PhiHitsTargetForRandomInputs) {
  Stream rng = Stream::derive(12, domain::kSample, 0);
  for (int t = 0; t < 100; ++t) {
    const int p = 3 + t % 4;
    const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform() * 40);
    const double m = semicircle_moment(p);
    const double s = p % 2 ? 10.0 * (rng.uniform() - 0.5) : m + 5.0 * rng.uniform();
    const auto h = defH_witness(n, s, p, m);
    EXPECT_NEAR(gaussian_phi(h, p), s, 1e-10 * std::max(1.0, std::abs(s)));
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(h.diag(i), 0.0);
  }
}

TEST(DefHWitness, Infeasible) {
  EXPECT_THROW(defH_witness(10, 1.0, 4, 2.0), InvalidInput);
  EXPECT_THROW(defH_witness(2, 1.0, 3, 0.0), InvalidInput);
  EXPECT_THROW(defH_witness(1, 3.0, 4, 2.0), InvalidInput);
}

TEST(Lemconv, ZeroRadiusIsPlainMomentError) {
  Stream rng = Stream::derive(13, domain::kSample, 0);
  const auto w = assemble_wigner(64, GaussianProfile{1.0, 1}, rng);
  Stream probe = Stream::derive(13, domain::kProbe, 0);
  const double d = lemconv_discrepancy_for(w.normalized, 4, 0.0, 10, probe);
  EXPECT_NEAR(d, std::abs(trace_power(w.normalized, 4) / 64.0 - 2.0), 1e-14);
}

TEST(Lemconv, ZeroNoiseOddOrder) {
  // tr(N^{1/p} H)^p / N = tr H^p, so only rounding remains.
  for (int p : {3, 5}) {
    Stream rng = Stream::derive(14, domain::kProbe, p);
    EXPECT_LE(lemconv_discrepancy_for(HermMatrix(48, 1), p, 1.0, 20, rng), 1e-12) << p;
  }
}

TEST(Lemconv, ZeroNoiseEvenOrderLeavesSemicircleMoment) {
  for (int p : {4, 6}) {
    Stream rng = Stream::derive(14, domain::kProbe, p);
    EXPECT_NEAR(lemconv_discrepancy_for(HermMatrix(48, 2), p, 1.0, 20, rng), semicircle_moment(p), 1e-12) << p;
  }
}

TEST(Lemconv, MedianDecreasesWithN) {
  auto median_at = [](std::size_t n) {
    std::vector<double> d;
    for (int r = 0; r < 20; ++r) {
      Stream rng = Stream::derive(15, domain::kSample, 1000 * n + r);
      d.push_back(lemconv_discrepancy(n, 4, 1.0, 8, GaussianProfile{1.0, 1}, rng));
    }
    return median(d);
  };
  EXPECT_LT(median_at(256), median_at(64));
}
