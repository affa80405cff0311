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

// Training steps: plain SGD, DP-SGD with dense noise, DP-FEST (noise only on
// a pre-selected vocabulary), DP-AdaFEST (noise only on rows that survive a
// private per-batch contribution threshold) and DP-AdaFEST+ (DP-AdaFEST over
// a DP-FEST selection).
//
// Every step clips per-example gradients jointly over embedding and head
// parameters, sums them in example order, adds noise, divides by the batch
// normalizer and applies the result with scatter semantics.

#ifndef SPARSE_DP_OPTIMIZERS_H_
#define SPARSE_DP_OPTIMIZERS_H_

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "sparse_dp/mechanisms.h"
#include "sparse_dp/model.h"
#include "sparse_dp/rng.h"

namespace sparse_dp {

enum class Algorithm { kSgd, kDpSgd, kDpFest, kAdaFest, kAdaFestPlus };

// Where DP-FEST gets its bucket frequencies.
enum class FrequencySource {
  kPublicPrior,
  kDpTopK,
  kFirstPeriod,
  kAllPeriods,
  kStreaming,
};

enum class BatchSampling { kShuffled, kPoisson };

// How DP-AdaFEST draws its survival mask when sigma1 > 0.
enum class MaskSampling { kDense, kGeometric };

std::string_view AlgorithmName(Algorithm algorithm);
absl::StatusOr<Algorithm> ParseAlgorithm(std::string_view name);
std::string_view FrequencySourceName(FrequencySource source);
absl::StatusOr<FrequencySource> ParseFrequencySource(std::string_view name);

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::kDpSgd;
  double learning_rate = 1.0;
  int batch_size = 1024;
  int steps = 500;
  NoiseConfig noise;
  // Total number of buckets DP-FEST keeps, split evenly over features.
  int64_t dpfest_k = 0;
  // Budget spent on DP top-k selection (kDpTopK only).
  double dpfest_epsilon = 0.01;
  FrequencySource frequency_source = FrequencySource::kPublicPrior;
  BatchSampling sampling = BatchSampling::kShuffled;
  MaskSampling mask_sampling = MaskSampling::kGeometric;

  absl::Status Validate() const;
};

// Per-feature sorted set of retained rows. The position of a row in its
// feature's list is its index in the compact (selected-only) space.
class SelectedVocabulary {
 public:
  SelectedVocabulary() = default;
  explicit SelectedVocabulary(std::vector<std::vector<int64_t>> rows);

  static SelectedVocabulary Full(const ModelParams& params);
  static SelectedVocabulary Empty(size_t feature_count);

  size_t feature_count() const { return rows_.size(); }
  const std::vector<int64_t>& rows(size_t feature) const {
    return rows_[feature];
  }
  int64_t TotalRows() const;
  int64_t NoisedCoordinates(const ModelParams& params) const;
  std::optional<int64_t> CompactIndex(size_t feature, int64_t row) const;
  bool Contains(size_t feature, int64_t row) const {
    return CompactIndex(feature, row).has_value();
  }
  absl::Status Validate(const ModelParams& params) const;

  friend bool operator==(const SelectedVocabulary&,
                         const SelectedVocabulary&) = default;

 private:
  std::vector<std::vector<int64_t>> rows_;
};

struct StepReport {
  // Coordinates that received gradient noise (embedding rows and head).
  int64_t noised_coordinate_count = 0;
  int64_t noised_embedding_coordinates = 0;
  // Rows in the noise support, per feature.
  std::vector<int64_t> surviving_rows;
  // Mean loss over the batch before the update.
  double loss = 0.0;
  std::chrono::nanoseconds wall_time{0};
};

struct StepOptions {
  // Divisor applied to the noisy sum. Zero means the batch size; Poisson
  // batches pass the expected batch size.
  double normalizer = 0.0;
  MaskSampling mask_sampling = MaskSampling::kGeometric;
};

// Non-private minibatch SGD on the mean gradient.
absl::StatusOr<StepReport> SgdStep(ModelParams& params,
                                   std::span<const Example> batch,
                                   double learning_rate,
                                   const StepOptions& options = {});

// Clip to c2, sum, add N(0, sigma2^2 c2^2) to every coordinate.
absl::StatusOr<StepReport> DpSgdStep(ModelParams& params,
                                     std::span<const Example> batch, double c2,
                                     double sigma2, double learning_rate,
                                     RngStream& rng,
                                     const StepOptions& options = {});

// Selects int(k / p) buckets per feature. With `epsilon` unset the exact
// top-k of `frequencies` is used (public prior); otherwise one-shot Gumbel
// top-k with the given total budget.
absl::StatusOr<SelectedVocabulary> DpFestSelect(
    const std::vector<std::vector<int64_t>>& frequencies, int64_t k,
    std::optional<double> epsilon, RngStream& rng);

// Bucket counts per feature over `examples`.
std::vector<std::vector<int64_t>> BucketFrequencies(
    std::span<const Example> examples, std::span<const int64_t> vocab_sizes);

absl::StatusOr<StepReport> DpFestStep(ModelParams& params,
                                      std::span<const Example> batch,
                                      const SelectedVocabulary& selected,
                                      double c2, double sigma2,
                                      double learning_rate, RngStream& rng,
                                      const StepOptions& options = {});

absl::StatusOr<StepReport> AdaFestStep(ModelParams& params,
                                       std::span<const Example> batch,
                                       const NoiseConfig& noise,
                                       double learning_rate, RngStream& rng,
                                       const StepOptions& options = {});

// DP-AdaFEST restricted to `selected`: rows outside it are never surveyed
// and never noised.
absl::StatusOr<StepReport> AdaFestPlusStep(ModelParams& params,
                                           std::span<const Example> batch,
                                           const SelectedVocabulary& selected,
                                           const NoiseConfig& noise,
                                           double learning_rate,
                                           RngStream& rng,
                                           const StepOptions& options = {});

// Produces minibatch indices over [0, num_examples): fixed-size batches from
// successive shuffles, or Poisson batches keeping each index with
// probability batch_size / num_examples.
class MinibatchSampler {
 public:
  MinibatchSampler(int64_t num_examples, int batch_size, BatchSampling mode,
                   RngStream rng);

  std::vector<int64_t> Next();
  double expected_batch_size() const { return batch_size_; }

 private:
  void Reshuffle();

  int64_t num_examples_;
  int batch_size_;
  BatchSampling mode_;
  RngStream rng_;
  std::vector<int64_t> permutation_;
  size_t cursor_ = 0;
};

}  // namespace sparse_dp

#endif  // SPARSE_DP_OPTIMIZERS_H_
