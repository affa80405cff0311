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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "sparse_dp/mechanisms.h"
#include "sparse_dp/model.h"

namespace sparse_dp {
namespace {

// Call-site tags for RngStream::Fork.
constexpr uint64_t kContributionSite = 1;
constexpr uint64_t kGradientSite = 2;

using Clock = std::chrono::steady_clock;

struct BatchGradients {
  std::vector<PerExampleGradient> gradients;
  double mean_loss = 0.0;
};

absl::StatusOr<BatchGradients> ComputeBatchGradients(
    const ModelParams& params, std::span<const Example> batch) {
  BatchGradients result;
  result.gradients.reserve(batch.size());
  double loss_sum = 0.0;
  for (const Example& example : batch) {
    absl::StatusOr<LossAndGradient> lg = ComputeLossAndGradient(params, example);
    if (!lg.ok()) return lg.status();
    loss_sum += lg->loss;
    result.gradients.push_back(std::move(lg->gradient));
  }
  if (!batch.empty()) result.mean_loss = loss_sum / batch.size();
  return result;
}

absl::StatusOr<double> Normalizer(std::span<const Example> batch,
                                  const StepOptions& options) {
  if (options.normalizer > 0.0) return options.normalizer;
  if (batch.empty()) {
    return absl::InvalidArgumentError(
        "empty batch requires an explicit normalizer");
  }
  return static_cast<double>(batch.size());
}

// Keeps only the embedding rows accepted by `keep(feature, row)`.
template <typename Keep>
void RestrictRows(PerExampleGradient& gradient, Keep keep) {
  for (size_t f = 0; f < gradient.embedding.size(); ++f) {
    std::vector<int64_t> drop;
    for (const auto& [row, values] : gradient.embedding[f].rows()) {
      if (!keep(f, row)) drop.push_back(row);
    }
    for (int64_t row : drop) gradient.embedding[f].EraseRow(row);
  }
}

void AddHeadNoise(std::vector<double>& head, double c2, double sigma2,
                  RngStream& rng) {
  if (!(sigma2 > 0.0)) return;
  const double stddev = sigma2 * c2;
  for (double& v : head) v += stddev * rng.Normal();
}

// Divides the noisy sum by the normalizer and applies it.
absl::Status FinishStep(ModelParams& params, PerExampleGradient& noisy_sum,
                        double normalizer, double learning_rate) {
  noisy_sum.Scale(1.0 / normalizer);
  return ApplyUpdate(params, noisy_sum, learning_rate);
}

// Shared DP-AdaFEST body. `restriction` limits which rows are surveyed.
absl::StatusOr<StepReport> AdaptiveStep(ModelParams& params,
                                        std::span<const Example> batch,
                                        const SelectedVocabulary* restriction,
                                        const NoiseConfig& noise,
                                        double learning_rate, RngStream& rng,
                                        const StepOptions& options) {
  const auto start = Clock::now();
  if (absl::Status status = noise.Validate(); !status.ok()) return status;
  absl::StatusOr<double> normalizer = Normalizer(batch, options);
  if (!normalizer.ok()) return normalizer.status();
  if (restriction != nullptr) {
    if (absl::Status status = restriction->Validate(params); !status.ok()) {
      return status;
    }
  }
  RngStream contribution_rng = rng.Fork(kContributionSite);
  RngStream gradient_rng = rng.Fork(kGradientSite);

  absl::StatusOr<BatchGradients> batch_gradients =
      ComputeBatchGradients(params, batch);
  if (!batch_gradients.ok()) return batch_gradients.status();
  std::vector<PerExampleGradient>& gradients = batch_gradients->gradients;
  if (restriction != nullptr) {
    for (PerExampleGradient& g : gradients) {
      RestrictRows(g, [&](size_t f, int64_t row) {
        return restriction->Contains(f, row);
      });
    }
  }

  // Activation sets in the surveyed (possibly compact) index space.
  const size_t num_features = params.tables.size();
  std::vector<int64_t> universe_sizes(num_features);
  for (size_t f = 0; f < num_features; ++f) {
    universe_sizes[f] = restriction != nullptr
                            ? static_cast<int64_t>(restriction->rows(f).size())
                            : params.tables[f].num_rows;
  }
  std::vector<ActivationSet> activations(gradients.size());
  for (size_t i = 0; i < gradients.size(); ++i) {
    activations[i].resize(num_features);
    for (size_t f = 0; f < num_features; ++f) {
      for (const auto& [row, values] : gradients[i].embedding[f].rows()) {
        activations[i][f].push_back(
            restriction != nullptr ? *restriction->CompactIndex(f, row) : row);
      }
    }
  }
  ContributionMap map =
      ComputeContributionMap(activations, universe_sizes, noise.c1);

  SurvivalMask mask;
  mask.rows.resize(num_features);
  if (noise.sigma1 == 0.0) {
    mask = ThresholdMask(map, noise.tau);
  } else if (options.mask_sampling == MaskSampling::kDense) {
    mask = ThresholdMask(
        NoiseContributionMap(std::move(map), noise.c1, noise.sigma1,
                             contribution_rng),
        noise.tau);
  } else {
    for (size_t f = 0; f < num_features; ++f) {
      std::vector<std::pair<int64_t, double>> nonzero;
      for (size_t j = 0; j < map.values[f].size(); ++j) {
        if (map.values[f][j] != 0.0) {
          nonzero.emplace_back(static_cast<int64_t>(j), map.values[f][j]);
        }
      }
      absl::StatusOr<std::vector<int64_t>> rows =
          SampleSurvivingRows(nonzero, universe_sizes[f], noise.tau,
                              noise.sigma1, noise.c1, contribution_rng);
      if (!rows.ok()) return rows.status();
      mask.rows[f] = *std::move(rows);
    }
  }
  if (restriction != nullptr) {
    for (size_t f = 0; f < num_features; ++f) {
      for (int64_t& row : mask.rows[f]) row = restriction->rows(f)[row];
    }
  }

  // Zero non-surviving rows, then clip.
  PerExampleGradient sum = ZeroGradient(params);
  for (PerExampleGradient& g : gradients) {
    RestrictRows(g, [&](size_t f, int64_t row) {
      return std::binary_search(mask.rows[f].begin(), mask.rows[f].end(), row);
    });
    ClipGradientInPlace(g, noise.c2);
    sum.Add(g);
  }

  StepReport report;
  report.loss = batch_gradients->mean_loss;
  for (size_t f = 0; f < num_features; ++f) {
    sum.embedding[f] = NoiseRows(sum.embedding[f], mask.rows[f], noise.c2,
                                 noise.sigma2, gradient_rng);
    report.surviving_rows.push_back(
        static_cast<int64_t>(mask.rows[f].size()));
    report.noised_embedding_coordinates +=
        static_cast<int64_t>(mask.rows[f].size()) * params.tables[f].dim;
  }
  AddHeadNoise(sum.head, noise.c2, noise.sigma2, gradient_rng);
  report.noised_coordinate_count =
      report.noised_embedding_coordinates + params.HeadParameterCount();
  if (absl::Status status =
          FinishStep(params, sum, *normalizer, learning_rate);
      !status.ok()) {
    return status;
  }
  report.wall_time = Clock::now() - start;
  return report;
}

}  // namespace

std::string_view AlgorithmName(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kSgd:
      return "sgd";
    case Algorithm::kDpSgd:
      return "dpsgd";
    case Algorithm::kDpFest:
      return "dpfest";
    case Algorithm::kAdaFest:
      return "adafest";
    case Algorithm::kAdaFestPlus:
      return "adafest_plus";
  }
  return "unknown";
}

absl::StatusOr<Algorithm> ParseAlgorithm(std::string_view name) {
  for (Algorithm a : {Algorithm::kSgd, Algorithm::kDpSgd, Algorithm::kDpFest,
                      Algorithm::kAdaFest, Algorithm::kAdaFestPlus}) {
    if (AlgorithmName(a) == name) return a;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown algorithm: ", std::string(name)));
}

std::string_view FrequencySourceName(FrequencySource source) {
  switch (source) {
    case FrequencySource::kPublicPrior:
      return "public";
    case FrequencySource::kDpTopK:
      return "dp_topk";
    case FrequencySource::kFirstPeriod:
      return "first";
    case FrequencySource::kAllPeriods:
      return "all";
    case FrequencySource::kStreaming:
      return "streaming";
  }
  return "unknown";
}

absl::StatusOr<FrequencySource> ParseFrequencySource(std::string_view name) {
  for (FrequencySource s :
       {FrequencySource::kPublicPrior, FrequencySource::kDpTopK,
        FrequencySource::kFirstPeriod, FrequencySource::kAllPeriods,
        FrequencySource::kStreaming}) {
    if (FrequencySourceName(s) == name) return s;
  }
  return absl::InvalidArgumentError(
      absl::StrCat("unknown frequency source: ", std::string(name)));
}

absl::Status OptimizerConfig::Validate() const {
  if (!(learning_rate > 0.0)) {
    return absl::InvalidArgumentError("learning rate must be positive");
  }
  if (batch_size < 1) {
    return absl::InvalidArgumentError("batch size must be at least 1");
  }
  if (steps < 1) return absl::InvalidArgumentError("steps must be at least 1");
  if (dpfest_k < 0) return absl::InvalidArgumentError("k must be nonnegative");
  if (dpfest_epsilon < 0) {
    return absl::InvalidArgumentError("selection epsilon must be nonnegative");
  }
  return noise.Validate();
}

SelectedVocabulary::SelectedVocabulary(std::vector<std::vector<int64_t>> rows)
    : rows_(std::move(rows)) {
  for (auto& feature_rows : rows_) {
    std::sort(feature_rows.begin(), feature_rows.end());
    feature_rows.erase(std::unique(feature_rows.begin(), feature_rows.end()),
                       feature_rows.end());
  }
}

SelectedVocabulary SelectedVocabulary::Full(const ModelParams& params) {
  std::vector<std::vector<int64_t>> rows;
  for (const EmbeddingTable& table : params.tables) {
    std::vector<int64_t> all(table.num_rows);
    std::iota(all.begin(), all.end(), 0);
    rows.push_back(std::move(all));
  }
  return SelectedVocabulary(std::move(rows));
}

SelectedVocabulary SelectedVocabulary::Empty(size_t feature_count) {
  return SelectedVocabulary(std::vector<std::vector<int64_t>>(feature_count));
}

int64_t SelectedVocabulary::TotalRows() const {
  int64_t total = 0;
  for (const auto& feature_rows : rows_) total += feature_rows.size();
  return total;
}

int64_t SelectedVocabulary::NoisedCoordinates(const ModelParams& params) const {
  int64_t total = 0;
  for (size_t f = 0; f < rows_.size(); ++f) {
    total += static_cast<int64_t>(rows_[f].size()) * params.tables[f].dim;
  }
  return total;
}

std::optional<int64_t> SelectedVocabulary::CompactIndex(size_t feature,
                                                        int64_t row) const {
  const std::vector<int64_t>& feature_rows = rows_[feature];
  auto it = std::lower_bound(feature_rows.begin(), feature_rows.end(), row);
  if (it == feature_rows.end() || *it != row) return std::nullopt;
  return static_cast<int64_t>(it - feature_rows.begin());
}

absl::Status SelectedVocabulary::Validate(const ModelParams& params) const {
  if (rows_.size() != params.tables.size()) {
    return absl::InvalidArgumentError(
        "selected vocabulary has the wrong number of features");
  }
  for (size_t f = 0; f < rows_.size(); ++f) {
    if (!rows_[f].empty() &&
        (rows_[f].front() < 0 || rows_[f].back() >= params.tables[f].num_rows)) {
      return absl::InvalidArgumentError(
          absl::StrCat("selected row out of range for feature ", f));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<StepReport> SgdStep(ModelParams& params,
                                   std::span<const Example> batch,
                                   double learning_rate,
                                   const StepOptions& options) {
  const auto start = Clock::now();
  absl::StatusOr<double> normalizer = Normalizer(batch, options);
  if (!normalizer.ok()) return normalizer.status();
  absl::StatusOr<BatchGradients> batch_gradients =
      ComputeBatchGradients(params, batch);
  if (!batch_gradients.ok()) return batch_gradients.status();
  PerExampleGradient sum = ZeroGradient(params);
  for (const PerExampleGradient& g : batch_gradients->gradients) sum.Add(g);
  StepReport report;
  report.loss = batch_gradients->mean_loss;
  for (const RowSparseGradient& part : sum.embedding) {
    report.surviving_rows.push_back(static_cast<int64_t>(part.row_count()));
  }
  if (absl::Status status =
          FinishStep(params, sum, *normalizer, learning_rate);
      !status.ok()) {
    return status;
  }
  report.wall_time = Clock::now() - start;
  return report;
}

absl::StatusOr<StepReport> DpSgdStep(ModelParams& params,
                                     std::span<const Example> batch, double c2,
                                     double sigma2, double learning_rate,
                                     RngStream& rng,
                                     const StepOptions& options) {
  const auto start = Clock::now();
  if (!(c2 > 0.0) || !(sigma2 >= 0.0)) {
    return absl::InvalidArgumentError("invalid clip norm or noise multiplier");
  }
  absl::StatusOr<double> normalizer = Normalizer(batch, options);
  if (!normalizer.ok()) return normalizer.status();
  RngStream gradient_rng = rng.Fork(kGradientSite);
  absl::StatusOr<BatchGradients> batch_gradients =
      ComputeBatchGradients(params, batch);
  if (!batch_gradients.ok()) return batch_gradients.status();
  PerExampleGradient sum = ZeroGradient(params);
  for (PerExampleGradient& g : batch_gradients->gradients) {
    ClipGradientInPlace(g, c2);
    sum.Add(g);
  }

  StepReport report;
  report.loss = batch_gradients->mean_loss;
  report.noised_embedding_coordinates = params.EmbeddingParameterCount();
  report.noised_coordinate_count = params.ParameterCount();
  for (const EmbeddingTable& table : params.tables) {
    report.surviving_rows.push_back(table.num_rows);
  }

  // Dense noise touches every table entry, so apply embeddings in place
  // instead of materializing a full row map. The arithmetic matches
  // FinishStep: scale the noisy sum by 1/normalizer, then subtract lr times it.
  const double inv = 1.0 / *normalizer;
  const double stddev = sigma2 > 0.0 ? sigma2 * c2 : 0.0;
  std::vector<double> row_update;
  for (size_t f = 0; f < params.tables.size(); ++f) {
    EmbeddingTable& table = params.tables[f];
    const auto& sum_rows = sum.embedding[f].rows();
    auto next = sum_rows.begin();
    row_update.resize(table.dim);
    for (int64_t row = 0; row < table.num_rows; ++row) {
      const bool has_row = next != sum_rows.end() && next->first == row;
      for (int i = 0; i < table.dim; ++i) {
        row_update[i] = has_row ? next->second[i] : 0.0;
        if (stddev > 0.0) row_update[i] += stddev * gradient_rng.Normal();
      }
      if (has_row) ++next;
      std::span<double> target = table.Row(row);
      for (int i = 0; i < table.dim; ++i) {
        target[i] -= learning_rate * (row_update[i] * inv);
      }
    }
    sum.embedding[f] = RowSparseGradient(table.num_rows, table.dim);
  }
  AddHeadNoise(sum.head, c2, sigma2, gradient_rng);
  if (absl::Status status = FinishStep(params, sum, *normalizer, learning_rate);
      !status.ok()) {
    return status;
  }
  report.wall_time = Clock::now() - start;
  return report;
}

std::vector<std::vector<int64_t>> BucketFrequencies(
    std::span<const Example> examples, std::span<const int64_t> vocab_sizes) {
  std::vector<std::vector<int64_t>> counts;
  for (int64_t size : vocab_sizes) counts.emplace_back(size, 0);
  for (const Example& example : examples) {
    for (size_t f = 0; f < counts.size() && f < example.categorical.size();
         ++f) {
      for (int64_t bucket : example.categorical[f]) {
        if (bucket >= 0 && bucket < static_cast<int64_t>(counts[f].size())) {
          ++counts[f][bucket];
        }
      }
    }
  }
  return counts;
}

absl::StatusOr<SelectedVocabulary> DpFestSelect(
    const std::vector<std::vector<int64_t>>& frequencies, int64_t k,
    std::optional<double> epsilon, RngStream& rng) {
  if (k <= 0) return absl::InvalidArgumentError("k must be positive");
  absl::StatusOr<std::vector<std::vector<int64_t>>> rows =
      DpTopKMultiFeature(frequencies, epsilon, k, rng);
  if (!rows.ok()) return rows.status();
  return SelectedVocabulary(*std::move(rows));
}

absl::StatusOr<StepReport> DpFestStep(ModelParams& params,
                                      std::span<const Example> batch,
                                      const SelectedVocabulary& selected,
                                      double c2, double sigma2,
                                      double learning_rate, RngStream& rng,
                                      const StepOptions& options) {
  const auto start = Clock::now();
  if (!(c2 > 0.0) || !(sigma2 >= 0.0)) {
    return absl::InvalidArgumentError("invalid clip norm or noise multiplier");
  }
  if (absl::Status status = selected.Validate(params); !status.ok()) {
    return status;
  }
  absl::StatusOr<double> normalizer = Normalizer(batch, options);
  if (!normalizer.ok()) return normalizer.status();
  RngStream gradient_rng = rng.Fork(kGradientSite);
  absl::StatusOr<BatchGradients> batch_gradients =
      ComputeBatchGradients(params, batch);
  if (!batch_gradients.ok()) return batch_gradients.status();
  PerExampleGradient sum = ZeroGradient(params);
  for (PerExampleGradient& g : batch_gradients->gradients) {
    RestrictRows(g, [&](size_t f, int64_t row) {
      return selected.Contains(f, row);
    });
    ClipGradientInPlace(g, c2);
    sum.Add(g);
  }

  StepReport report;
  report.loss = batch_gradients->mean_loss;
  for (size_t f = 0; f < params.tables.size(); ++f) {
    // The selected list is the compact index space: noise is drawn for
    // |selected| x d coordinates only.
    sum.embedding[f] =
        NoiseRows(sum.embedding[f], selected.rows(f), c2, sigma2, gradient_rng);
    report.surviving_rows.push_back(
        static_cast<int64_t>(selected.rows(f).size()));
  }
  AddHeadNoise(sum.head, c2, sigma2, gradient_rng);
  report.noised_embedding_coordinates = selected.NoisedCoordinates(params);
  report.noised_coordinate_count =
      report.noised_embedding_coordinates + params.HeadParameterCount();
  if (absl::Status status = FinishStep(params, sum, *normalizer, learning_rate);
      !status.ok()) {
    return status;
  }
  report.wall_time = Clock::now() - start;
  return report;
}

absl::StatusOr<StepReport> AdaFestStep(ModelParams& params,
                                       std::span<const Example> batch,
                                       const NoiseConfig& noise,
                                       double learning_rate, RngStream& rng,
                                       const StepOptions& options) {
  return AdaptiveStep(params, batch, nullptr, noise, learning_rate, rng,
                      options);
}

absl::StatusOr<StepReport> AdaFestPlusStep(ModelParams& params,
                                           std::span<const Example> batch,
                                           const SelectedVocabulary& selected,
                                           const NoiseConfig& noise,
                                           double learning_rate,
                                           RngStream& rng,
                                           const StepOptions& options) {
  return AdaptiveStep(params, batch, &selected, noise, learning_rate, rng,
                      options);
}

MinibatchSampler::MinibatchSampler(int64_t num_examples, int batch_size,
                                   BatchSampling mode, RngStream rng)
    : num_examples_(num_examples),
      batch_size_(batch_size),
      mode_(mode),
      rng_(std::move(rng)) {
  permutation_.resize(num_examples_);
  std::iota(permutation_.begin(), permutation_.end(), 0);
  Reshuffle();
}

void MinibatchSampler::Reshuffle() {
  std::shuffle(permutation_.begin(), permutation_.end(), rng_.engine());
  cursor_ = 0;
}

std::vector<int64_t> MinibatchSampler::Next() {
  std::vector<int64_t> batch;
  if (num_examples_ == 0) return batch;
  if (mode_ == BatchSampling::kPoisson) {
    const double rate =
        std::min(1.0, static_cast<double>(batch_size_) / num_examples_);
    return SampleBernoulliPositions(num_examples_, rate, rng_);
  }
  batch.reserve(batch_size_);
  while (static_cast<int>(batch.size()) < batch_size_) {
    if (cursor_ == permutation_.size()) Reshuffle();
    batch.push_back(permutation_[cursor_++]);
  }
  return batch;
}

}  // namespace sparse_dp
