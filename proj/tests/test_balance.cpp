// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "hgen/balance.hpp"
#include "hgen/rng.hpp"

namespace hgen {
namespace {

FieldLosses losses(std::vector<std::optional<double>> f, std::optional<double> label) {
  FieldLosses l;
  l.feature = std::move(f);
  l.label = label;
  return l;
}

TEST(FieldLossMean, Examples) {
  // Positive at cosine 1, K-1 negatives at cosine 0.
  for (int k : {2, 5, 64}) {
    const double e = std::exp(1.0);
    const double lp = std::log(e / (e + k - 1));
    const std::vector<double> lps(7, lp);
    EXPECT_NEAR(*mean_nll(lps), -std::log(e / (e + k - 1)), 1e-14);
    const std::vector<double> uni(3, -std::log(static_cast<double>(k)));
    EXPECT_NEAR(*mean_nll(uni), std::log(static_cast<double>(k)), 1e-14);
  }
  EXPECT_FALSE(mean_nll({}).has_value());
}

TEST(SelfBalancingLoss, Examples) {
  EXPECT_DOUBLE_EQ(self_balancing_loss(losses({1.0, 1.0, 1.0, 1.0}, 0.7), std::vector<double>(4, 0.0)), 4.7);
  const double l2 = std::log(2.0);
  EXPECT_NEAR(self_balancing_loss(losses({1.0}, std::nullopt), std::vector<double>{l2}), 0.5 + l2 / 2, 1e-15);
  EXPECT_NEAR(self_balancing_loss(losses({1.0}, std::nullopt), std::vector<double>{l2}), 0.8466, 5e-5);
  EXPECT_NEAR(self_balancing_loss(losses({0.5}, std::nullopt), std::vector<double>{equilibrium_s(0.5)}), 0.5,
              1e-15);
}

TEST(SelfBalancingLoss, AbsentFieldsSkipTermAndRegulariser) {
  const std::vector<double> s = {0.3, 5.0, -1.0};
  const double with = self_balancing_loss(losses({2.0, std::nullopt, 1.0}, 0.25), s);
  EXPECT_NEAR(with, std::exp(-0.3) * 2.0 + 0.15 + std::exp(1.0) * 1.0 - 0.5 + 0.25, 1e-14);
  EXPECT_EQ(losses({2.0, std::nullopt, 1.0}, 0.25).num_present(), 2);
  EXPECT_NEAR(uniform_loss(losses({2.0, std::nullopt, 1.0}, 0.25)), 3.25, 1e-15);
  const auto g = grad_s(losses({2.0, std::nullopt, 1.0}, 0.25), s);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_THROW(self_balancing_loss(losses({1.0}, 0.0), std::vector<double>{0.0, 0.0}), std::invalid_argument);
}

TEST(GradS, ExamplesAndFiniteDifference) {
  EXPECT_EQ(grad_s(0.5, 0.0), 0.0);
  EXPECT_EQ(grad_s(1.0, 0.0), -0.5);
  Rng rng = make_stream(1, Stream::kOracle);
  for (int k = 0; k < 1000; ++k) {
    const double l = 0.01 + 5.0 * uniform01(rng);
    const double s = 6.0 * uniform01(rng) - 3.0;
    const auto f = [&](double x) { return self_balancing_loss(losses({l}, std::nullopt), std::vector<double>{x}); };
    const double h = 1e-5;
    EXPECT_NEAR(grad_s(l, s), (f(s + h) - f(s - h)) / (2 * h), 1e-8);
  }
}

TEST(Equilibrium, Examples) {
  EXPECT_EQ(equilibrium_s(0.5), 0.0);
  EXPECT_NEAR(equilibrium_s(std::exp(1.0) / 2), 1.0, 1e-15);
  EXPECT_NEAR(equilibrium_s(2.0), std::log(4.0), 1e-15);
  EXPECT_NEAR(equilibrium_s(2.0), 1.3863, 5e-5);
  EXPECT_THROW(equilibrium_s(0.0), std::invalid_argument);
  EXPECT_THROW(equilibrium_s(-1.0), std::invalid_argument);
  for (double l : {0.1, 0.5, 2.0, 10.0}) EXPECT_NEAR(grad_s(l, equilibrium_s(l)), 0.0, 1e-15);
}

TEST(ConvergeS, Examples) {
  for (double l : {0.1, 0.5, 2.0, 10.0}) {
    const double star = equilibrium_s(l);
    for (double d0 : {-0.1, -0.03, 0.05, 0.1}) {
      const auto traj = converge_s(l, star + d0, 2.0, 20);
      ASSERT_EQ(traj.size(), 21u);
      EXPECT_LT(std::abs(traj.back() - star), 1e-6);
    }
    const auto one = converge_s(l, star + 1e-3, 1.0, 1);
    EXPECT_NEAR((one[1] - star) / 1e-3, 0.5, 0.005);
    for (double x : converge_s(l, star, 1.0, 50)) EXPECT_NEAR(x, star, 1e-15);
  }
}

// With d = s - s*, one step maps d to d - (eta/2)(1 - exp(-d)). From above the
// map is a contraction for every eta in (0, 2]. From below it can overshoot:
// |d'| <= |d| needs (eta/2)(exp(x) - 1) <= 2x with x = -d, so monotone
// convergence is a local property there.
bool monotone_region(double d0, double eta) {
  if (d0 >= 0.0) return true;
  const double x = -d0;
  return 0.5 * eta * std::expm1(x) <= 2.0 * x;
}

TEST(ConvergeS, MonotoneForStepsUpToTwo) {
  Rng rng = make_stream(2, Stream::kOracle);
  int checked = 0;
  for (int k = 0; k < 2000; ++k) {
    const double l = std::exp(4.0 * uniform01(rng) - 2.0);
    const double star = equilibrium_s(l);
    const double s0 = star + 4.0 * uniform01(rng) - 2.0;
    const double eta = 0.05 + 1.95 * uniform01(rng);
    if (!monotone_region(s0 - star, eta)) continue;
    ++checked;
    const auto traj = converge_s(l, s0, eta, 200);
    for (std::size_t i = 1; i < traj.size(); ++i) {
      ASSERT_LE(std::abs(traj[i] - star), std::abs(traj[i - 1] - star) + 1e-15) << l << " " << s0 << " " << eta;
    }
  }
  EXPECT_GT(checked, 1500);
}

TEST(ConvergeS, FarBelowEquilibriumOvershootsButConverges) {
  const double l = 1.0, star = equilibrium_s(l);
  ASSERT_FALSE(monotone_region(-2.0, 2.0));
  const auto traj = converge_s(l, star - 2.0, 2.0, 100);
  EXPECT_GT(std::abs(traj[1] - star), 2.0);
  EXPECT_LT(std::abs(traj.back() - star), 1e-6);
}

TEST(SecondDerivative, ExamplesAndConvexity) {
  EXPECT_EQ(second_derivative_s(1.0, 0.0), 1.0);
  Rng rng = make_stream(3, Stream::kOracle);
  for (int k = 0; k < 1000; ++k) {
    const double l = 0.01 + 10.0 * uniform01(rng);
    const double s = 10.0 * uniform01(rng) - 5.0;
    const double h = 1e-4;
    const auto f = [&](double x) { return std::exp(-x) * l + x / 2; };
    const double fd = (f(s + h) - 2 * f(s) + f(s - h)) / (h * h);
    EXPECT_GT(second_derivative_s(l, s), 0.0);
    EXPECT_NEAR(second_derivative_s(l, s), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(NegativeFeedback, GradientSignAfterPerturbation) {
  Rng rng = make_stream(4, Stream::kOracle);
  for (int k = 0; k < 1000; ++k) {
    const double l_old = std::exp(4.0 * uniform01(rng) - 2.0);
    const double s = equilibrium_s(l_old);
    const double factor = 1.0 + 0.5 * uniform01(rng) + 1e-3;
    // Loss up: the gradient turns negative at the old equilibrium; loss down:
    // positive. A descent step moves s toward the new equilibrium log(2 l).
    const double up = grad_s(l_old * factor, s);
    const double down = grad_s(l_old / factor, s);
    EXPECT_LT(up, 0.0);
    EXPECT_GT(down, 0.0);
    EXPECT_GT(converge_s(l_old * factor, s, 0.5, 1)[1], s);
    EXPECT_LT(converge_s(l_old / factor, s, 0.5, 1)[1], s);
  }
}

TEST(NormalizedDifficulty, Examples) {
  const std::vector<double> ref = {2.0, 4.0};
  const std::vector<std::optional<double>> same = {2.0, 4.0};
  for (const auto& d : normalized_difficulty(same, ref)) EXPECT_EQ(*d, 1.0);
  const std::vector<std::optional<double>> half = {1.0, std::nullopt};
  const auto d = normalized_difficulty(half, ref);
  EXPECT_EQ(*d[0], 0.5);
  EXPECT_FALSE(d[1].has_value());
  const std::vector<double> unset = {0.0, 1.0};
  EXPECT_THROW(normalized_difficulty(same, unset), std::invalid_argument);
}

TEST(Difficulty, SigmaView) {
  DifficultyParams p{{0.0, std::log(4.0)}};
  EXPECT_EQ(p.sigma(0), 1.0);
  EXPECT_NEAR(p.sigma(1), 2.0, 1e-15);
}

}  // namespace
}  // namespace hgen
