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

#include "sparse_dp/mechanisms.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"

namespace sparse_dp {

absl::Status NoiseConfig::Validate() const {
  if (!(c1 > 0) || !(c2 > 0)) {
    return absl::InvalidArgumentError("clip norms must be positive");
  }
  if (!(sigma1 >= 0) || !(sigma2 >= 0) || !(tau >= 0)) {
    return absl::InvalidArgumentError(
        "noise multipliers and threshold must be nonnegative");
  }
  return absl::OkStatus();
}

int64_t SurvivalMask::TotalRows() const {
  int64_t total = 0;
  for (const auto& feature_rows : rows) total += feature_rows.size();
  return total;
}

ContributionMap ComputeContributionMap(std::span<const ActivationSet> batch,
                                       std::span<const int64_t> vocab_sizes,
                                       double c1) {
  ContributionMap map;
  map.values.reserve(vocab_sizes.size());
  for (int64_t size : vocab_sizes) map.values.emplace_back(size, 0.0);
  for (const ActivationSet& example : batch) {
    size_t activated = 0;
    for (const auto& rows : example) activated += rows.size();
    if (activated == 0) continue;
    const double norm = std::sqrt(static_cast<double>(activated));
    const double weight = std::min(1.0, c1 / norm);
    for (size_t f = 0; f < example.size(); ++f) {
      for (int64_t row : example[f]) map.values[f][row] += weight;
    }
  }
  return map;
}

ContributionMap NoiseContributionMap(ContributionMap map, double c1,
                                     double sigma1, RngStream& rng) {
  if (sigma1 == 0.0) return map;
  const double stddev = sigma1 * c1;
  for (auto& values : map.values) {
    for (double& v : values) v += stddev * rng.Normal();
  }
  return map;
}

std::vector<int64_t> ThresholdRows(std::span<const double> values,
                                   double tau) {
  std::vector<int64_t> rows;
  for (size_t j = 0; j < values.size(); ++j) {
    if (values[j] >= tau) rows.push_back(static_cast<int64_t>(j));
  }
  return rows;
}

SurvivalMask ThresholdMask(const ContributionMap& map, double tau) {
  SurvivalMask mask;
  for (const auto& values : map.values) {
    mask.rows.push_back(ThresholdRows(values, tau));
  }
  return mask;
}

double GaussianSurvival(double t) { return 0.5 * std::erfc(t / std::sqrt(2.0)); }

std::vector<int64_t> SampleBernoulliPositions(int64_t n, double p,
                                              RngStream& rng) {
  std::vector<int64_t> positions;
  if (n <= 0 || !(p > 0.0)) return positions;
  if (p >= 1.0) {
    positions.resize(n);
    std::iota(positions.begin(), positions.end(), 0);
    return positions;
  }
  // Failures before the next success, i.e. the gap minus one.
  std::geometric_distribution<int64_t> gap(p);
  int64_t position = -1;
  while (true) {
    const int64_t skip = gap(rng.engine());
    if (skip >= n - position - 1) break;
    position += skip + 1;
    positions.push_back(position);
  }
  return positions;
}

absl::StatusOr<std::vector<int64_t>> SampleSurvivingRows(
    std::span<const std::pair<int64_t, double>> nonzero, int64_t num_rows,
    double tau, double sigma1, double c1, RngStream& rng) {
  if (!(sigma1 > 0.0)) {
    return absl::InvalidArgumentError(
        "sigma1 must be positive; threshold the noiseless map directly");
  }
  for (size_t i = 0; i < nonzero.size(); ++i) {
    if (nonzero[i].first < 0 || nonzero[i].first >= num_rows ||
        (i > 0 && nonzero[i].first <= nonzero[i - 1].first)) {
      return absl::InvalidArgumentError(
          "nonzero rows must be sorted, unique and in range");
    }
  }
  const double stddev = sigma1 * c1;
  std::vector<int64_t> survivors;
  for (const auto& [row, value] : nonzero) {
    if (rng.Uniform() < GaussianSurvival((tau - value) / stddev)) {
      survivors.push_back(row);
    }
  }
  const int64_t zero_count = num_rows - static_cast<int64_t>(nonzero.size());
  const std::vector<int64_t> ranks =
      SampleBernoulliPositions(zero_count, GaussianSurvival(tau / stddev), rng);
  // Map ranks among the zero rows back to row indices.
  std::vector<int64_t> zero_survivors;
  zero_survivors.reserve(ranks.size());
  size_t skipped = 0;
  for (int64_t rank : ranks) {
    int64_t row = rank + static_cast<int64_t>(skipped);
    while (skipped < nonzero.size() && nonzero[skipped].first <= row) {
      ++skipped;
      row = rank + static_cast<int64_t>(skipped);
    }
    zero_survivors.push_back(row);
  }
  std::vector<int64_t> merged;
  merged.reserve(survivors.size() + zero_survivors.size());
  std::merge(survivors.begin(), survivors.end(), zero_survivors.begin(),
             zero_survivors.end(), std::back_inserter(merged));
  return merged;
}

absl::StatusOr<std::vector<int64_t>> GumbelTopK(std::span<const int64_t> counts,
                                                std::optional<double> epsilon,
                                                int64_t k, RngStream& rng) {
  const int64_t c = static_cast<int64_t>(counts.size());
  if (k < 0 || k > c) {
    return absl::InvalidArgumentError(
        absl::StrCat("cannot select ", k, " of ", c, " buckets"));
  }
  if (epsilon.has_value() && !(*epsilon > 0.0)) {
    return absl::InvalidArgumentError("epsilon must be positive");
  }
  std::vector<double> scores(counts.begin(), counts.end());
  if (epsilon.has_value()) {
    const double scale = 1.0 / *epsilon;
    for (double& s : scores) s += -scale * std::log(-std::log(rng.Uniform()));
  }
  std::vector<int64_t> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](int64_t a, int64_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(k);
  return order;
}

absl::StatusOr<std::vector<std::vector<int64_t>>> DpTopKMultiFeature(
    const std::vector<std::vector<int64_t>>& counts,
    std::optional<double> epsilon_total, int64_t k_total, RngStream& rng) {
  const int64_t p = static_cast<int64_t>(counts.size());
  if (p < 1) return absl::InvalidArgumentError("need at least one feature");
  if (k_total < 0) return absl::InvalidArgumentError("k must be nonnegative");
  std::optional<double> per_feature_epsilon;
  if (epsilon_total.has_value()) per_feature_epsilon = *epsilon_total / p;
  const int64_t per_feature_k = k_total / p;
  std::vector<std::vector<int64_t>> selected;
  selected.reserve(p);
  for (const auto& feature_counts : counts) {
    const int64_t k = std::min<int64_t>(per_feature_k, feature_counts.size());
    absl::StatusOr<std::vector<int64_t>> rows =
        GumbelTopK(feature_counts, per_feature_epsilon, k, rng);
    if (!rows.ok()) return rows.status();
    selected.push_back(*std::move(rows));
  }
  return selected;
}

RowSparseGradient NoiseRows(const RowSparseGradient& sum,
                            std::span<const int64_t> mask_rows, double c2,
                            double sigma2, RngStream& rng) {
  RowSparseGradient noised(sum.num_rows(), sum.dim());
  const double stddev = sigma2 > 0.0 ? sigma2 * c2 : 0.0;
  for (int64_t row : mask_rows) {
    std::vector<double>& target = noised.MutableRow(row);
    if (auto it = sum.rows().find(row); it != sum.rows().end()) {
      target = it->second;
    }
    if (stddev > 0.0) {
      for (double& v : target) v += stddev * rng.Normal();
    }
  }
  return noised;
}

}  // namespace sparse_dp
