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

#include "sparse_dp/optimizers.h"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <vector>

#include "gtest/gtest.h"
#include "absl/status/status.h"
#include "sparse_dp/mechanisms.h"
#include "sparse_dp/model.h"
#include "sparse_dp/rng.h"
#include "test_util.h"

namespace sparse_dp {
namespace {

using ::sparse_dp::testing::RandomBatch;
using ::sparse_dp::testing::RandomModel;
using ::sparse_dp::testing::SameParams;

constexpr double kInf = std::numeric_limits<double>::infinity();

RngStream Noise(uint64_t seed) {
  return RngStream(seed, RngPurpose::kMechanismNoise);
}

std::vector<double> Flatten(const ModelParams& params) {
  std::vector<double> out;
  for (const EmbeddingTable& table : params.tables) {
    out.insert(out.end(), table.values.begin(), table.values.end());
  }
  const std::vector<double> head = FlattenHead(params);
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

std::set<std::pair<size_t, int64_t>> ChangedRows(const ModelParams& before,
                                                 const ModelParams& after) {
  std::set<std::pair<size_t, int64_t>> changed;
  for (size_t f = 0; f < before.tables.size(); ++f) {
    for (int64_t row = 0; row < before.tables[f].num_rows; ++row) {
      const auto a = before.tables[f].Row(row);
      const auto b = after.tables[f].Row(row);
      if (!std::equal(a.begin(), a.end(), b.begin())) changed.insert({f, row});
    }
  }
  return changed;
}

class OptimizerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    params_ = RandomModel({40, 25}, 3, 2, {8}, 13);
    RngStream rng(2, RngPurpose::kSampling);
    batch_ = RandomBatch(params_, 16, 3, rng);
  }

  ModelParams params_;
  std::vector<Example> batch_;
};

TEST_F(OptimizerTest, DpSgdWithoutNoiseOrClipIsSgd) {
  ModelParams sgd = params_;
  ModelParams dp = params_;
  ASSERT_TRUE(SgdStep(sgd, batch_, 0.5).ok());
  RngStream rng = Noise(1);
  ASSERT_TRUE(DpSgdStep(dp, batch_, kInf, 0.0, 0.5, rng).ok());
  EXPECT_TRUE(SameParams(sgd, dp));
}

TEST_F(OptimizerTest, DpSgdNoisesEveryCoordinate) {
  RngStream rng = Noise(1);
  absl::StatusOr<StepReport> report =
      DpSgdStep(params_, batch_, 1.0, 1.0, 0.1, rng);
  ASSERT_TRUE(report.ok());
  EXPECT_EQ(report->noised_coordinate_count, params_.ParameterCount());
  EXPECT_EQ(report->noised_embedding_coordinates,
            params_.EmbeddingParameterCount());
}

TEST_F(OptimizerTest, DpSgdUpdateIsUnbiased) {
  const double c2 = 0.5, sigma2 = 2.0, lr = 1.0;
  ModelParams clean = params_;
  RngStream unused = Noise(0);
  ASSERT_TRUE(DpSgdStep(clean, batch_, c2, 0.0, lr, unused).ok());
  const std::vector<double> start = Flatten(params_);
  const std::vector<double> target = Flatten(clean);
  const int trials = 1000;
  std::vector<double> mean(start.size(), 0.0);
  RngStream rng = Noise(3);
  for (int t = 0; t < trials; ++t) {
    ModelParams p = params_;
    ASSERT_TRUE(DpSgdStep(p, batch_, c2, sigma2, lr, rng).ok());
    const std::vector<double> flat = Flatten(p);
    for (size_t i = 0; i < flat.size(); ++i) mean[i] += flat[i] / trials;
  }
  const double tolerance =
      3.0 * lr * sigma2 * c2 / (batch_.size() * std::sqrt(trials));
  int violations = 0;
  for (size_t i = 0; i < mean.size(); ++i) {
    violations += std::abs(mean[i] - target[i]) > tolerance;
  }
  // 3-sigma bands: about 0.27% of coordinates may fall outside.
  EXPECT_LE(violations, static_cast<int>(0.01 * mean.size()) + 1);
}

TEST_F(OptimizerTest, PublicSelectionWithFullKIsFullVocabulary) {
  const std::vector<int64_t> vocab = params_.VocabSizes();
  const auto counts = BucketFrequencies(batch_, vocab);
  RngStream rng(1, RngPurpose::kGumbel);
  absl::StatusOr<SelectedVocabulary> selected =
      DpFestSelect(counts, 2 * 40, std::nullopt, rng);
  ASSERT_TRUE(selected.ok());
  EXPECT_EQ(*selected, SelectedVocabulary::Full(params_));
}

TEST_F(OptimizerTest, SelectionRejectsNonPositiveK) {
  const auto counts = BucketFrequencies(batch_, params_.VocabSizes());
  RngStream rng(1, RngPurpose::kGumbel);
  EXPECT_FALSE(DpFestSelect(counts, 0, std::nullopt, rng).ok());
}

TEST_F(OptimizerTest, BucketFrequenciesCountExamples) {
  const std::vector<Example> batch = {
      {.label = 0, .numeric = {0, 0}, .categorical = {{1, 2}, {0}}},
      {.label = 1, .numeric = {0, 0}, .categorical = {{2}, {0}}}};
  const std::vector<int64_t> vocab = {4, 2};
  const auto counts = BucketFrequencies(batch, vocab);
  EXPECT_EQ(counts[0], (std::vector<int64_t>{0, 1, 2, 0}));
  EXPECT_EQ(counts[1], (std::vector<int64_t>{2, 0}));
}

TEST_F(OptimizerTest, DpFestNoisedCountIsSelectedRowsPlusHead) {
  SelectedVocabulary selected({{1, 5, 7}, {0, 3}});
  RngStream rng = Noise(1);
  absl::StatusOr<StepReport> report =
      DpFestStep(params_, batch_, selected, 1.0, 1.0, 0.1, rng);
  ASSERT_TRUE(report.ok());
  EXPECT_EQ(report->noised_coordinate_count,
            5 * 3 + params_.HeadParameterCount());
}

TEST_F(OptimizerTest, DpFestEmptySelectionFreezesTables) {
  const ModelParams before = params_;
  RngStream rng = Noise(1);
  ASSERT_TRUE(DpFestStep(params_, batch_, SelectedVocabulary::Empty(2), 1.0,
                         1.0, 0.1, rng)
                  .ok());
  EXPECT_EQ(params_.tables[0].values, before.tables[0].values);
  EXPECT_EQ(params_.tables[1].values, before.tables[1].values);
  EXPECT_NE(FlattenHead(params_), FlattenHead(before));
}

TEST_F(OptimizerTest, DpFestNoiseOnUntouchedRowsHasZeroMean) {
  // Rows 38 and 39 of feature 0 are never activated by this batch.
  std::vector<Example> batch = batch_;
  for (Example& e : batch) {
    std::erase_if(e.categorical[0], [](int64_t row) { return row >= 38; });
    if (e.categorical[0].empty()) e.categorical[0] = {0};
  }
  SelectedVocabulary selected({{38, 39}, {}});
  const int trials = 1000;
  const double c2 = 1.0, sigma2 = 1.5, lr = 1.0;
  RngStream rng = Noise(5);
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    ModelParams p = params_;
    ASSERT_TRUE(DpFestStep(p, batch, selected, c2, sigma2, lr, rng).ok());
    total += p.tables[0].Row(38)[0] - params_.tables[0].Row(38)[0];
  }
  const double stderr_mean =
      lr * sigma2 * c2 / (batch.size() * std::sqrt(trials));
  EXPECT_LT(std::abs(total / trials), 3.0 * stderr_mean);
}

TEST_F(OptimizerTest, AdaFestDegenerateIsBitEqualToSgd) {
  ModelParams sgd = params_;
  ModelParams ada = params_;
  ASSERT_TRUE(SgdStep(sgd, batch_, 0.7).ok());
  NoiseConfig noise{.c1 = kInf, .c2 = kInf, .sigma1 = 0, .sigma2 = 0, .tau = 0};
  RngStream rng = Noise(1);
  ASSERT_TRUE(AdaFestStep(ada, batch_, noise, 0.7, rng).ok());
  EXPECT_TRUE(SameParams(sgd, ada));
}

TEST_F(OptimizerTest, AdaFestHighThresholdMovesOnlyHead) {
  const ModelParams before = params_;
  NoiseConfig noise{.c1 = 1, .c2 = 1, .sigma1 = 0, .sigma2 = 1,
                    .tau = batch_.size() + 1.0};
  RngStream rng = Noise(1);
  absl::StatusOr<StepReport> report =
      AdaFestStep(params_, batch_, noise, 0.1, rng);
  ASSERT_TRUE(report.ok());
  EXPECT_EQ(params_.tables[0].values, before.tables[0].values);
  EXPECT_EQ(params_.tables[1].values, before.tables[1].values);
  EXPECT_EQ(report->noised_coordinate_count, params_.HeadParameterCount());
}

TEST_F(OptimizerTest, AdaFestChangesExactlyTheSurvivingRows) {
  for (MaskSampling sampling : {MaskSampling::kDense, MaskSampling::kGeometric}) {
    ModelParams params = params_;
    const ModelParams before = params;
    NoiseConfig noise{.c1 = 1, .c2 = 1, .sigma1 = 1.0, .sigma2 = 1.0,
                      .tau = 1.5};
    RngStream rng = Noise(7);
    absl::StatusOr<StepReport> report = AdaFestStep(
        params, batch_, noise, 0.1, rng, {.mask_sampling = sampling});
    ASSERT_TRUE(report.ok());
    int64_t surviving = 0;
    for (int64_t rows : report->surviving_rows) surviving += rows;
    EXPECT_EQ(static_cast<int64_t>(ChangedRows(before, params).size()),
              surviving);
    EXPECT_EQ(report->noised_coordinate_count,
              surviving * 3 + params.HeadParameterCount());
  }
}

TEST_F(OptimizerTest, ClippingFollowsZeroing) {
  // One example, no noise, B = 1, lr = 1: the update norm is the clipped
  // norm of the masked gradient.
  const std::vector<Example> one = {batch_.front()};
  for (double tau : {0.0, 0.5}) {
    ModelParams params = params_;
    const std::vector<double> before = Flatten(params);
    NoiseConfig noise{.c1 = 1, .c2 = 1e-3, .sigma1 = 0, .sigma2 = 0,
                      .tau = tau};
    RngStream rng = Noise(1);
    ASSERT_TRUE(AdaFestStep(params, one, noise, 1.0, rng).ok());
    const std::vector<double> after = Flatten(params);
    double norm_sq = 0.0;
    for (size_t i = 0; i < after.size(); ++i) {
      norm_sq += (after[i] - before[i]) * (after[i] - before[i]);
    }
    EXPECT_LE(std::sqrt(norm_sq), 1e-3 * (1 + 1e-9));
    EXPECT_GT(std::sqrt(norm_sq), 0.99e-3);
  }
}

TEST_F(OptimizerTest, RaisingThresholdNeverGrowsMask) {
  int64_t previous = std::numeric_limits<int64_t>::max();
  for (double tau : {0.0, 0.2, 0.5, 1.0, 2.0, 4.0}) {
    ModelParams params = params_;
    NoiseConfig noise{.c1 = 1, .c2 = 1, .sigma1 = 0, .sigma2 = 1, .tau = tau};
    RngStream rng = Noise(1);
    absl::StatusOr<StepReport> report =
        AdaFestStep(params, batch_, noise, 0.1, rng);
    ASSERT_TRUE(report.ok());
    int64_t total = 0;
    for (int64_t rows : report->surviving_rows) total += rows;
    EXPECT_LE(total, previous);
    previous = total;
  }
}

TEST_F(OptimizerTest, AdaFestPlusWithFullVocabularyMatchesAdaFest) {
  for (MaskSampling sampling : {MaskSampling::kDense, MaskSampling::kGeometric}) {
    ModelParams a = params_;
    ModelParams b = params_;
    NoiseConfig noise{.c1 = 1, .c2 = 1, .sigma1 = 0.8, .sigma2 = 0.5,
                      .tau = 0.7};
    RngStream rng_a = Noise(9);
    RngStream rng_b = Noise(9);
    ASSERT_TRUE(AdaFestStep(a, batch_, noise, 0.2, rng_a,
                            {.mask_sampling = sampling})
                    .ok());
    ASSERT_TRUE(AdaFestPlusStep(b, batch_, SelectedVocabulary::Full(params_),
                                noise, 0.2, rng_b, {.mask_sampling = sampling})
                    .ok());
    EXPECT_TRUE(SameParams(a, b));
  }
}

TEST_F(OptimizerTest, AdaFestPlusEmptySelectionTrainsHeadOnly) {
  const ModelParams before = params_;
  NoiseConfig noise{.c1 = 1, .c2 = 1, .sigma1 = 1, .sigma2 = 1, .tau = 0.5};
  RngStream rng = Noise(1);
  absl::StatusOr<StepReport> report = AdaFestPlusStep(
      params_, batch_, SelectedVocabulary::Empty(2), noise, 0.1, rng);
  ASSERT_TRUE(report.ok());
  EXPECT_EQ(params_.tables[0].values, before.tables[0].values);
  EXPECT_EQ(report->noised_coordinate_count, params_.HeadParameterCount());
}

TEST_F(OptimizerTest, AdaFestPlusCountWithinIntersectionBound) {
  SelectedVocabulary selected({{0, 1, 2, 3, 4, 5}, {0, 1, 2}});
  NoiseConfig noise{.c1 = 1, .c2 = 1, .sigma1 = 0, .sigma2 = 1, .tau = 0.3};
  ModelParams a = params_;
  ModelParams b = params_;
  RngStream rng_a = Noise(1);
  RngStream rng_b = Noise(1);
  const int64_t ada =
      AdaFestStep(a, batch_, noise, 0.1, rng_a)->noised_coordinate_count;
  const int64_t plus =
      AdaFestPlusStep(b, batch_, selected, noise, 0.1, rng_b)
          ->noised_coordinate_count;
  const int64_t head = params_.HeadParameterCount();
  EXPECT_LE(plus, std::min(ada - head, selected.TotalRows() * 3) + head);
}

TEST_F(OptimizerTest, StepsAreDeterministic) {
  NoiseConfig noise{.c1 = 1, .c2 = 1, .sigma1 = 1, .sigma2 = 1, .tau = 1};
  ModelParams a = params_;
  ModelParams b = params_;
  RngStream rng_a = Noise(4);
  RngStream rng_b = Noise(4);
  for (int t = 0; t < 3; ++t) {
    ASSERT_TRUE(AdaFestStep(a, batch_, noise, 0.1, rng_a).ok());
    ASSERT_TRUE(AdaFestStep(b, batch_, noise, 0.1, rng_b).ok());
  }
  EXPECT_TRUE(SameParams(a, b));
}

TEST(SelectedVocabularyTest, CompactIndexAndValidation) {
  SelectedVocabulary selected({{9, 2, 5, 2}});
  EXPECT_EQ(selected.rows(0), (std::vector<int64_t>{2, 5, 9}));
  EXPECT_EQ(selected.CompactIndex(0, 5), 1);
  EXPECT_FALSE(selected.CompactIndex(0, 3).has_value());
  ModelParams params = RandomModel({8}, 2, 0, {4}, 1);
  EXPECT_FALSE(selected.Validate(params).ok());
}

TEST(MinibatchSamplerTest, ShuffledEpochCoversEveryExampleOnce) {
  MinibatchSampler sampler(12, 4, BatchSampling::kShuffled,
                           RngStream(1, RngPurpose::kSampling));
  std::multiset<int64_t> seen;
  for (int i = 0; i < 3; ++i) {
    for (int64_t index : sampler.Next()) seen.insert(index);
  }
  for (int64_t i = 0; i < 12; ++i) EXPECT_EQ(seen.count(i), 1u);
}

TEST(MinibatchSamplerTest, PoissonBatchSizeHasExpectedMean) {
  MinibatchSampler sampler(10000, 100, BatchSampling::kPoisson,
                           RngStream(1, RngPurpose::kSampling));
  double total = 0.0;
  const int draws = 400;
  for (int i = 0; i < draws; ++i) total += sampler.Next().size();
  // Binomial(10000, 0.01): stddev of the mean is about 0.5.
  EXPECT_NEAR(total / draws, 100.0, 2.0);
}

TEST(AlgorithmNameTest, RoundTrips) {
  for (Algorithm a : {Algorithm::kSgd, Algorithm::kDpSgd, Algorithm::kDpFest,
                      Algorithm::kAdaFest, Algorithm::kAdaFestPlus}) {
    EXPECT_EQ(*ParseAlgorithm(AlgorithmName(a)), a);
  }
  EXPECT_FALSE(ParseAlgorithm("adam").ok());
  for (const char* name : {"public", "dp_topk", "first", "all", "streaming"}) {
    EXPECT_EQ(FrequencySourceName(*ParseFrequencySource(name)), name);
  }
}

TEST(OptimizerConfigTest, Validation) {
  OptimizerConfig config;
  EXPECT_TRUE(config.Validate().ok());
  config.learning_rate = 0.0;
  EXPECT_FALSE(config.Validate().ok());
  config.learning_rate = 1.0;
  config.noise.c2 = 0.0;
  EXPECT_FALSE(config.Validate().ok());
}

}  // namespace
}  // namespace sparse_dp
