// Copyright 2026 Google LLC
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sparse_dp/accountant.h"

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <tuple>
#include <vector>

#include "gtest/gtest.h"
#include "absl/status/status.h"
#include "oracles.h"

namespace sparse_dp {
namespace {

using ::sparse_dp::testing::AnalyticGaussianDelta;
using ::sparse_dp::testing::RdpEpsilon;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Fine grid for comparisons against closed forms.
PldOptions FineGrid() {
  PldOptions options;
  options.grid_width = 1e-4;
  return options;
}

TEST(ComposeGaussianSigmasTest, Formula) {
  EXPECT_NEAR(*ComposeGaussianSigmas(1.0, 1.0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(*ComposeGaussianSigmas(2.0, 2.0), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(*ComposeGaussianSigmas(kInf, 3.0), 3.0);
  EXPECT_EQ(*ComposeGaussianSigmas(3.0, kInf), 3.0);
}

TEST(ComposeGaussianSigmasTest, SymmetricAndBelowMinimum) {
  for (double a : {0.3, 1.0, 4.0}) {
    for (double b : {0.5, 2.0, 7.0}) {
      EXPECT_EQ(*ComposeGaussianSigmas(a, b), *ComposeGaussianSigmas(b, a));
      EXPECT_LE(*ComposeGaussianSigmas(a, b), std::min(a, b));
    }
  }
}

TEST(ComposeGaussianSigmasTest, RejectsNonPositive) {
  EXPECT_EQ(ComposeGaussianSigmas(0.0, 0.0).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_FALSE(ComposeGaussianSigmas(-1.0, 1.0).ok());
}

TEST(SplitSigmaTest, ComposesBackToEffectiveSigma) {
  for (double ratio : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
    const SigmaPair pair = SplitSigma(1.7, ratio);
    EXPECT_NEAR(pair.sigma1 / pair.sigma2, ratio, 1e-12);
    EXPECT_NEAR(*ComposeGaussianSigmas(pair.sigma1, pair.sigma2), 1.7, 1e-12);
  }
}

TEST(PldTest, MatchesAnalyticGaussian) {
  for (double sigma : {0.5, 1.0, 2.0}) {
    absl::StatusOr<PldPair> pld = BuildPld(1.0, sigma, FineGrid());
    ASSERT_TRUE(pld.ok()) << pld.status();
    for (double epsilon : {0.0, 0.5, 1.0, 2.0, 4.0}) {
      EXPECT_NEAR(pld->DeltaForEpsilon(epsilon),
                  AnalyticGaussianDelta(sigma, epsilon), 1e-4)
          << "sigma=" << sigma << " epsilon=" << epsilon;
    }
  }
}

TEST(PldTest, AnalyticSpotValues) {
  EXPECT_NEAR(AnalyticGaussianDelta(1.0, 0.0), 0.38292, 1e-5);
  EXPECT_NEAR(AnalyticGaussianDelta(1.0, 1.0), 0.12693, 1e-5);
  absl::StatusOr<PldPair> pld = BuildPld(1.0, 1.0);
  ASSERT_TRUE(pld.ok());
  EXPECT_NEAR(pld->DeltaForEpsilon(1.0), 0.12693, 1e-3);
}

TEST(PldTest, PessimisticAtDefaultGrid) {
  for (double sigma : {0.5, 1.0, 2.0}) {
    absl::StatusOr<PldPair> pld = BuildPld(1.0, sigma);
    ASSERT_TRUE(pld.ok());
    // Between grid points the bound is strict.
    for (double epsilon : {0.0005, 0.5003, 1.0007, 2.0001}) {
      EXPECT_GT(pld->DeltaForEpsilon(epsilon),
                AnalyticGaussianDelta(sigma, epsilon));
    }
    // On grid points it is exact up to rounding.
    for (double epsilon : {0.0, 0.5, 1.0, 2.0}) {
      EXPECT_GE(pld->DeltaForEpsilon(epsilon) + 1e-12,
                AnalyticGaussianDelta(sigma, epsilon));
    }
  }
}

TEST(PldTest, ConnectDotsIsTighterThanRoundingUp) {
  PldOptions round_up;
  round_up.discretization = Discretization::kRoundUp;
  for (double gamma : {0.01, 1.0}) {
    absl::StatusOr<PldPair> dots = BuildPld(gamma, 1.0);
    absl::StatusOr<PldPair> rounded = BuildPld(gamma, 1.0, round_up);
    ASSERT_TRUE(dots.ok() && rounded.ok());
    absl::StatusOr<PldPair> dots_t = ComposePld(*dots, 100);
    absl::StatusOr<PldPair> rounded_t = ComposePld(*rounded, 100, round_up);
    ASSERT_TRUE(dots_t.ok() && rounded_t.ok());
    for (double epsilon : {0.0, 0.5, 1.0, 2.0}) {
      EXPECT_LE(dots->DeltaForEpsilon(epsilon),
                rounded->DeltaForEpsilon(epsilon) + 1e-12);
      EXPECT_LE(dots_t->DeltaForEpsilon(epsilon),
                rounded_t->DeltaForEpsilon(epsilon));
    }
    if (gamma == 1.0) {
      for (double epsilon : {0.0, 0.5, 1.0, 2.0}) {
        EXPECT_GE(rounded->DeltaForEpsilon(epsilon),
                  AnalyticGaussianDelta(1.0, epsilon));
      }
    }
  }
}

TEST(PldTest, DeltaNonIncreasingInEpsilon) {
  absl::StatusOr<PldPair> pld = BuildPld(0.05, 0.8);
  ASSERT_TRUE(pld.ok());
  absl::StatusOr<PldPair> composed = ComposePld(*pld, 50);
  ASSERT_TRUE(composed.ok());
  double previous = 1.0;
  for (double epsilon = 0.0; epsilon < 6.0; epsilon += 0.1) {
    const double delta = composed->DeltaForEpsilon(epsilon);
    EXPECT_LE(delta, previous + 1e-15);
    previous = delta;
  }
}

TEST(PldTest, MassesSumToOne) {
  absl::StatusOr<PldPair> pld = BuildPld(0.1, 1.0);
  ASSERT_TRUE(pld.ok());
  for (const PrivacyLossDistribution* d : {&pld->remove, &pld->add}) {
    double total = d->infinity_mass();
    for (double m : d->masses()) total += m;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(PldTest, SingleCompositionIsIdentity) {
  absl::StatusOr<PldPair> pld = BuildPld(0.2, 1.3);
  ASSERT_TRUE(pld.ok());
  absl::StatusOr<PldPair> once = ComposePld(*pld, 1);
  ASSERT_TRUE(once.ok());
  for (double epsilon : {0.0, 0.3, 1.0}) {
    EXPECT_EQ(once->DeltaForEpsilon(epsilon), pld->DeltaForEpsilon(epsilon));
  }
}

TEST(PldTest, DeltaNonDecreasingInSteps) {
  absl::StatusOr<PldPair> pld = BuildPld(0.02, 1.0);
  ASSERT_TRUE(pld.ok());
  double previous = 0.0;
  for (int64_t steps : {1, 2, 5, 10, 100, 1000}) {
    absl::StatusOr<PldPair> composed = ComposePld(*pld, steps);
    ASSERT_TRUE(composed.ok());
    const double delta = composed->DeltaForEpsilon(1.0);
    EXPECT_GE(delta, previous);
    previous = delta;
  }
}

TEST(PldTest, ComposeMatchesRepeatedCompose) {
  absl::StatusOr<PldPair> pld = BuildPld(0.1, 1.0);
  ASSERT_TRUE(pld.ok());
  absl::StatusOr<PrivacyLossDistribution> squared =
      pld->remove.SelfCompose(3);
  absl::StatusOr<PrivacyLossDistribution> twice =
      pld->remove.Compose(pld->remove);
  ASSERT_TRUE(twice.ok());
  absl::StatusOr<PrivacyLossDistribution> thrice = twice->Compose(pld->remove);
  ASSERT_TRUE(squared.ok() && thrice.ok());
  for (double epsilon : {0.0, 0.5, 1.0}) {
    EXPECT_NEAR(squared->DeltaForEpsilon(epsilon),
                thrice->DeltaForEpsilon(epsilon), 1e-10);
  }
}

TEST(PldTest, UpperBoundsMonteCarloHockeyStick) {
  const double gamma = 0.1, sigma = 1.0;
  absl::StatusOr<PldPair> pld = BuildPld(gamma, sigma);
  ASSERT_TRUE(pld.ok());
  std::mt19937_64 engine(2024);
  std::normal_distribution<double> normal(0.0, sigma);
  std::bernoulli_distribution coin(gamma);
  auto loss = [&](double x) {
    return std::log((1.0 - gamma) +
                    gamma * std::exp((2.0 * x - 1.0) / (2.0 * sigma * sigma)));
  };
  const int samples = 2000000;
  for (double epsilon : {0.0, 0.1, 0.2}) {
    // Remove direction: E_P[(1 - e^(eps - L))_+]; add: E_Q[(1 - e^(eps + L))_+].
    double sum_remove = 0.0, sq_remove = 0.0, sum_add = 0.0, sq_add = 0.0;
    for (int i = 0; i < samples; ++i) {
      const double xp = normal(engine) + (coin(engine) ? 1.0 : 0.0);
      const double r = std::max(0.0, 1.0 - std::exp(epsilon - loss(xp)));
      sum_remove += r;
      sq_remove += r * r;
      const double xq = normal(engine);
      const double a = std::max(0.0, 1.0 - std::exp(epsilon + loss(xq)));
      sum_add += a;
      sq_add += a * a;
    }
    for (auto [sum, sq] : {std::pair{sum_remove, sq_remove},
                           std::pair{sum_add, sq_add}}) {
      const double mean = sum / samples;
      const double se = std::sqrt((sq / samples - mean * mean) / samples);
      EXPECT_GE(pld->DeltaForEpsilon(epsilon), mean - 3.0 * se)
          << "epsilon=" << epsilon;
    }
  }
}

TEST(PldTest, RejectsBadParameters) {
  EXPECT_FALSE(BuildPld(0.0, 1.0).ok());
  EXPECT_FALSE(BuildPld(1.5, 1.0).ok());
  EXPECT_FALSE(BuildPld(0.5, 0.0).ok());
}

TEST(PldTest, CoarseGridIsRejected) {
  PldOptions options;
  options.grid_width = 2.0;
  EXPECT_FALSE(BuildPld(1.0, 0.3, options).ok());
  options.discretization = Discretization::kRoundUp;
  EXPECT_FALSE(BuildPld(1.0, 0.3, options).ok());
}

TEST(EpsilonTest, HighNoiseGivesSmallEpsilon) {
  absl::StatusOr<double> epsilon = EpsilonFor(100.0, 1.0, 1, 1e-6);
  ASSERT_TRUE(epsilon.ok());
  EXPECT_LT(*epsilon, 0.1);
}

TEST(EpsilonTest, InvertsAnalyticDelta) {
  absl::StatusOr<double> epsilon =
      EpsilonFor(1.0, 1.0, 1, AnalyticGaussianDelta(1.0, 0.0), FineGrid());
  ASSERT_TRUE(epsilon.ok());
  EXPECT_LT(*epsilon, 2e-3);
}

TEST(EpsilonTest, StrictlyDecreasingInSigma) {
  double previous = kInf;
  for (double sigma : {0.6, 0.8, 1.0, 1.5, 2.0, 3.0}) {
    absl::StatusOr<double> epsilon = EpsilonFor(sigma, 0.01, 500, 1e-5);
    ASSERT_TRUE(epsilon.ok());
    EXPECT_LT(*epsilon, previous);
    previous = *epsilon;
  }
}

TEST(EpsilonTest, NonDecreasingInGamma) {
  double previous = 0.0;
  for (double gamma : {0.001, 0.01, 0.05, 0.2}) {
    absl::StatusOr<double> epsilon = EpsilonFor(1.0, gamma, 100, 1e-5);
    ASSERT_TRUE(epsilon.ok());
    EXPECT_GE(*epsilon, previous);
    previous = *epsilon;
  }
}

TEST(EpsilonTest, NeverExceedsRdpBound) {
  for (double gamma : {0.001, 0.01, 0.1}) {
    for (double sigma : {0.5, 1.0, 2.0}) {
      for (int64_t steps : {100, 1000}) {
        const double delta = 1e-6;
        absl::StatusOr<double> pld = EpsilonFor(sigma, gamma, steps, delta);
        ASSERT_TRUE(pld.ok()) << pld.status();
        EXPECT_LE(*pld, RdpEpsilon(gamma, sigma, steps, delta))
            << gamma << " " << sigma << " " << steps;
      }
    }
  }
}

TEST(CalibrateSigmaTest, RoundTrip) {
  for (auto [epsilon, delta, gamma, steps] :
       {std::tuple{1.0, 1e-5, 0.01, int64_t{500}},
        std::tuple{0.5, 1e-6, 0.001, int64_t{1000}},
        std::tuple{4.0, 1e-5, 0.1, int64_t{100}}}) {
    absl::StatusOr<double> sigma = CalibrateSigma(epsilon, delta, gamma, steps);
    ASSERT_TRUE(sigma.ok()) << sigma.status();
    absl::StatusOr<double> achieved = EpsilonFor(*sigma, gamma, steps, delta);
    ASSERT_TRUE(achieved.ok());
    EXPECT_LE(*achieved, epsilon);
  }
}

TEST(CalibrateSigmaTest, DecreasingInEpsilon) {
  double previous = kInf;
  for (double epsilon : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    absl::StatusOr<double> sigma = CalibrateSigma(epsilon, 1e-5, 0.02, 200);
    ASSERT_TRUE(sigma.ok());
    EXPECT_LT(*sigma, previous);
    previous = *sigma;
  }
}

TEST(CalibrateSigmaTest, RecoversAnalyticSigma) {
  const double delta = AnalyticGaussianDelta(1.0, 1.0);
  absl::StatusOr<double> sigma = CalibrateSigma(1.0, delta, 1.0, 1, FineGrid());
  ASSERT_TRUE(sigma.ok());
  EXPECT_NEAR(*sigma, 1.0, 1e-2);
}

TEST(CalibrateSigmaTest, RejectsBadBudget) {
  EXPECT_FALSE(CalibrateSigma(0.0, 1e-5, 0.01, 10).ok());
  EXPECT_FALSE(CalibrateSigma(1.0, 0.0, 0.01, 10).ok());
  EXPECT_FALSE(CalibrateSigma(1.0, 1.0, 0.01, 10).ok());
}

TEST(AdaFestBudgetTest, MatchesDpSgdAtComposedSigma) {
  const double gamma = 0.01, delta = 1e-5;
  const int64_t steps = 300;
  absl::StatusOr<double> ada = AdaFestBudget(1.4, 1.4, gamma, steps, delta);
  absl::StatusOr<double> dp =
      EpsilonFor(1.4 / std::sqrt(2.0), gamma, steps, delta);
  ASSERT_TRUE(ada.ok() && dp.ok());
  // The two sigmas differ in the last bit, which can move the grid range.
  EXPECT_NEAR(*ada, *dp, 1e-6);
  absl::StatusOr<double> disabled = AdaFestBudget(kInf, 1.2, gamma, steps, delta);
  absl::StatusOr<double> plain = EpsilonFor(1.2, gamma, steps, delta);
  EXPECT_NEAR(*disabled, *plain, 1e-9);
}

TEST(AdaFestBudgetTest, IncreasesAsSigma1Decreases) {
  double previous = 0.0;
  for (double sigma1 : {10.0, 4.0, 2.0, 1.0}) {
    absl::StatusOr<double> epsilon = AdaFestBudget(sigma1, 1.5, 0.01, 200, 1e-5);
    ASSERT_TRUE(epsilon.ok());
    EXPECT_GT(*epsilon, previous);
    previous = *epsilon;
  }
}

TEST(DpFestBudgetTest, AddsSelectionEpsilon) {
  const EpsilonDelta training{.epsilon = 0.99, .delta = 1e-5};
  EXPECT_EQ(DpFestBudget(training, 0.0).epsilon, 0.99);
  EXPECT_EQ(DpFestBudget(training, 0.01).epsilon, 0.99 + 0.01);
  EXPECT_EQ(DpFestBudget(training, 0.01).delta, 1e-5);
}

TEST(BudgetSpecTest, Validation) {
  EXPECT_TRUE((BudgetSpec{.epsilon = 1, .delta = 1e-5}).Validate().ok());
  EXPECT_FALSE((BudgetSpec{.epsilon = 1, .delta = 1e-5, .selection_epsilon = 1})
                   .Validate()
                   .ok());
  EXPECT_FALSE((BudgetSpec{.epsilon = 1, .delta = 0}).Validate().ok());
  EXPECT_EQ((BudgetSpec{.epsilon = 1, .delta = 1e-5, .selection_epsilon = 0.01})
                .TrainingEpsilon(),
            1 - 0.01);
}

TEST(ExcessLossBoundTest, Values) {
  EXPECT_NEAR(ExcessLossBound(1.0, 0.1, 1.0, 1.0, 100),
              0.1 * std::sqrt(1.21 + 1.0) + 0.1, 1e-12);
  EXPECT_NEAR(ExcessLossBound(1.0, 0.1, 1.0, 1.0, 100), 0.24866, 1e-5);
  EXPECT_NEAR(ExcessLossBound(2.0, 0.0, 0.0, 3.0, 16), 3.0 * 2.0 / 4.0, 1e-15);
  const double base = ExcessLossBound(1.0, 0.1, 1.0, 1.0, 100);
  EXPECT_GT(ExcessLossBound(1.0, 0.2, 1.0, 1.0, 100), base);
  EXPECT_GT(ExcessLossBound(1.0, 0.1, 2.0, 1.0, 100), base);
  EXPECT_GT(ExcessLossBound(1.0, 0.1, 1.0, 2.0, 100), base);
}

TEST(SparseTradeoffTest, Cases) {
  EXPECT_FALSE(SparseTradeoffFavorable(1.0, 0.0, 50.0, 50.0, 1.0, 10));
  EXPECT_TRUE(SparseTradeoffFavorable(1.0, 0.0, 1.0, 1e6, 1.0, 12345));
  // sqrt(1.0201 + 1) + 0.01 * 100 = 2.4214 < sqrt(1 + 1e4) = 100.005.
  EXPECT_TRUE(SparseTradeoffFavorable(1.0, 0.01, 100.0, 1e6, 0.1, 10000));
  EXPECT_FALSE(SparseTradeoffFavorable(1.0, 0.5, 100.0, 1e6, 0.01, 10000));
}

}  // namespace
}  // namespace sparse_dp
