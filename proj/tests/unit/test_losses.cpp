#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "swnet/losses.hpp"
#include "swnet/rng.hpp"

using namespace swnet;

TEST(SoftmaxCe, UniformLogits) {
  const std::vector<double> z{0.0, 0.0};
  EXPECT_NEAR(softmax_ce(z, 0), std::log(2.0), 1e-15);
  const std::vector<double> big{1000.0, 1000.0, 1000.0};
  EXPECT_NEAR(softmax_ce(big, 2), std::log(3.0), 1e-12);
  EXPECT_THROW(softmax_ce(z, 2), std::invalid_argument);
  EXPECT_THROW(softmax_ce(z, -1), std::invalid_argument);
}

TEST(SoftmaxCe, GradientSumsToZero) {
  const std::vector<double> z{0.3, -1.2, 2.0};
  const auto g = softmax_ce_grad(z, 1);
  EXPECT_NEAR(std::accumulate(g.begin(), g.end(), 0.0), 0.0, 1e-15);
  EXPECT_LT(g[1], 0.0);
}

TEST(L2Regression, Values) {
  EXPECT_EQ(l2_regression({1, 1, 1, 1}, {0, 0, 0, 0}), 4.0);
  EXPECT_EQ(l2_regression({0.5, -2, 3, 1}, {0.5, -2, 3, 1}), 0.0);
  const auto g = l2_regression_grad({1, 0, 0, 0}, {0, 0, 0, 2});
  EXPECT_EQ(g.dx, 2.0);
  EXPECT_EQ(g.dh, -4.0);
}

TEST(UnifiedLoss, WorkedValueAndEmptyNormalizers) {
  std::vector<SampleRecord> recs(2);
  recs[0].l_cls = 1.0;
  recs[0].l_reg = 0.0;
  recs[1].l_cls = 0.0;
  recs[1].l_reg = 0.0;
  WeightAssignment w{{0.5, 1.0}, {0.0, 0.0}};
  EXPECT_EQ(unified_loss(recs, w, {1.0, 1.0}), 0.5);
  EXPECT_EQ(unified_loss(recs, w, {0.0, 0.0}), 0.0);
  WeightAssignment bad{{1.0}, {0.0}};
  EXPECT_THROW(unified_loss(recs, bad, {1.0, 1.0}), std::invalid_argument);
}

// Indicator weights must reproduce the direct subset sums bit for bit.
TEST(UnifiedLoss, IndicatorWeightsEqualSubsetSums) {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(64);
    std::vector<SampleRecord> recs(n);
    WeightAssignment w{std::vector<double>(n), std::vector<double>(n)};
    std::vector<std::size_t> a_cls;
    std::vector<std::size_t> a_reg;
    for (std::size_t i = 0; i < n; ++i) {
      recs[i].l_cls = 5.0 * rng.uniform();
      recs[i].l_reg = 3.0 * rng.uniform();
      if (rng.uniform() < 0.5) {
        w.s_cls[i] = 1.0;
        a_cls.push_back(i);
      }
      if (rng.uniform() < 0.3) {
        w.s_reg[i] = 1.0;
        a_reg.push_back(i);
      }
    }
    double cls = 0.0;
    for (std::size_t i : a_cls) cls += recs[i].l_cls;
    double reg = 0.0;
    for (std::size_t i : a_reg) reg += recs[i].l_reg;
    const double n1 = static_cast<double>(a_cls.size());
    const double n2 = static_cast<double>(a_reg.size());
    const double expected = (n1 > 0 ? cls / n1 : 0.0) + (n2 > 0 ? reg / n2 : 0.0);
    EXPECT_EQ(unified_loss(recs, w, {n1, n2}), expected);
  }
}

TEST(UncertaintyLoss, WorkedValue) {
  SampleRecord r;
  r.label = SampleLabel::negative;
  r.l_cls = 2.0;
  r.m_cls = 0.5;
  r.l_reg = 100.0;  // ignored for negatives
  r.m_reg = 1.0;
  RegularizerConfig reg{1.0, 1.0};
  EXPECT_NEAR(uncertainty_loss(r, reg), 2.0 * std::exp(-1.0) + 0.5, 1e-15);
  EXPECT_NEAR(uncertainty_loss(r, reg), 1.23576, 1e-5);
}

TEST(UncertaintyLoss, ZeroLogSigmaIsUnweighted) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    SampleRecord r;
    r.label = i % 2 ? SampleLabel::positive : SampleLabel::negative;
    r.l_cls = rng.uniform() * 4;
    r.l_reg = rng.uniform() * 4;
    const double expected = r.l_cls + (r.positive() ? r.l_reg : 0.0);
    EXPECT_EQ(uncertainty_loss(r, {0.5, 0.5}), expected);
  }
}

TEST(UncertaintyLoss, StationaryWhereWeightBalancesRegularizer) {
  // d/dm [exp(-2m) L + lambda m] = 0 at exp(-2m) = lambda / (2L).
  SampleRecord r;
  r.label = SampleLabel::positive;
  r.l_cls = 1.5;
  r.l_reg = 0.8;
  RegularizerConfig reg{0.5, 0.5};
  r.m_cls = -0.5 * std::log(reg.lambda1 / (2.0 * r.l_cls));
  r.m_reg = -0.5 * std::log(reg.lambda2 / (2.0 * r.l_reg));
  const auto g = uncertainty_loss_grad(r, reg);
  EXPECT_NEAR(g.d_mcls, 0.0, 1e-14);
  EXPECT_NEAR(g.d_mreg, 0.0, 1e-14);
  EXPECT_NEAR(g.d_lcls, std::exp(-2.0 * r.m_cls), 1e-15);
}

TEST(UncertaintyLoss, NegativesHaveNoRegressionGradient) {
  SampleRecord r;
  r.label = SampleLabel::negative;
  r.l_reg = 3.0;
  r.m_reg = 0.7;
  const auto g = uncertainty_loss_grad(r, {0.5, 0.5});
  EXPECT_EQ(g.d_lreg, 0.0);
  EXPECT_EQ(g.d_mreg, 0.0);
}

TEST(OptimalSigma, ClosedFormAndErrors) {
  const auto s = optimal_sigma(1.0, 2.0);
  EXPECT_EQ(s.sigma2, 1.0);
  EXPECT_NEAR(s.reduced_loss, regression_uncertainty_loss(1.0, 1.0, 2.0), 1e-15);
  EXPECT_EQ(optimal_sigma(1.0, 1.0).sigma2, 2.0);
  EXPECT_THROW(optimal_sigma(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(optimal_sigma(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(regression_uncertainty_loss(1.0, 0.0, 1.0), std::invalid_argument);
}

TEST(OptimalSigma, AgreesWithGridSearch) {
  Rng rng(3);
  for (double lambda2 : {0.5, 1.0, 2.0}) {
    for (int trial = 0; trial < 20; ++trial) {
      const double l = 0.01 + 9.99 * rng.uniform();
      // Log-spaced grid over sigma in [1e-3, 1e3].
      const int n = 20000;
      double best_sigma = 0.0;
      double best = INFINITY;
      for (int k = 0; k < n; ++k) {
        const double sigma = std::pow(10.0, -3.0 + 6.0 * k / (n - 1));
        const double v = l / (sigma * sigma) + lambda2 * std::log(sigma);
        if (v < best) {
          best = v;
          best_sigma = sigma;
        }
      }
      const double step = std::pow(10.0, 6.0 / (n - 1));
      const double sigma_star = std::sqrt(optimal_sigma(l, lambda2).sigma2);
      EXPECT_LE(std::abs(std::log(best_sigma / sigma_star)), std::log(step) + 1e-12);
      EXPECT_NEAR(optimal_sigma(l, lambda2).reduced_loss,
                  regression_uncertainty_loss(l, sigma_star, lambda2), 1e-12);
    }
  }
}

TEST(TemperedSoftmax, LimitsAndErrors) {
  const std::vector<double> z{1.0, 0.0};
  const auto p1 = tempered_softmax(z, 1.0);
  EXPECT_NEAR(p1[0], std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-15);
  const auto flat = tempered_softmax(z, 1e6);
  EXPECT_NEAR(flat[0], 0.5, 1e-4);
  EXPECT_NEAR(flat[1], 0.5, 1e-4);
  const std::vector<double> eq{3.0, 3.0, 3.0, 3.0};
  for (double v : tempered_softmax(eq, 0.1)) EXPECT_DOUBLE_EQ(v, 0.25);
  EXPECT_THROW(tempered_softmax(z, 0.0), std::invalid_argument);
  EXPECT_THROW(tempered_softmax(z, -1.0), std::invalid_argument);
}

TEST(TemperedSoftmax, SumsToOneAndPermutationEquivariant) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> z(5);
    for (double& v : z) v = 6.0 * rng.normal();
    const double t = 0.1 + 3.0 * rng.uniform();
    const auto p = tempered_softmax(z, t);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    std::vector<double> rev(z.rbegin(), z.rend());
    const auto q = tempered_softmax(rev, t);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(q[i], p[z.size() - 1 - i], 1e-15);
  }
}

TEST(TemperatureApprox, ExactAtUnitSigma) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z(1 + rng.index(6));
    for (double& v : z) v = 4.0 * rng.normal();
    EXPECT_EQ(temperature_approx_error(z, 1.0), 0.0);
  }
  const std::vector<double> single{0.7};
  EXPECT_EQ(temperature_approx_error(single, 1.0), 0.0);
  EXPECT_THROW(temperature_approx_error(single, 0.0), std::invalid_argument);
}

TEST(TemperatureApprox, TwoSidedEvaluation) {
  const std::vector<double> z{1.0, 2.0};
  const double lhs = (std::exp(0.25) + std::exp(0.5)) / 2.0;
  const double rhs = std::pow(std::exp(1.0) + std::exp(2.0), 0.25);
  const double err = temperature_approx_error(z, 2.0);
  EXPECT_GT(err, 0.0);
  EXPECT_NEAR(err, std::abs(lhs - rhs), 1e-14);
  EXPECT_NEAR(err, 0.316659, 1e-6);
}

TEST(KlBaseline, MatchesUncertaintyRegressionHalf) {
  const Offset4 pred{0.1, -0.2, 0.3, 0.05};
  const Offset4 target{0.0, 0.1, -0.1, 0.2};
  EXPECT_EQ(kl_baseline_loss(pred, target, 0.0, 0.5), l2_regression(pred, target));
  EXPECT_EQ(kl_baseline_loss(target, target, 0.3, 0.5), 0.5 * 0.3);
  SampleRecord r;
  r.label = SampleLabel::positive;
  r.l_reg = l2_regression(pred, target);
  r.m_reg = 0.4;
  const RegularizerConfig reg{0.5, 0.7};
  const double reg_half = uncertainty_loss(r, reg) - uncertainty_loss(SampleRecord{}, reg);
  EXPECT_NEAR(kl_baseline_loss(pred, target, 0.4, 0.7), reg_half, 1e-15);
}
