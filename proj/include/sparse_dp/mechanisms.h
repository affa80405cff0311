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

// Randomized primitives used by the sparse private optimizers: the clipped
// contribution map and its noisy version, thresholding, a memory-efficient
// survival-mask sampler, one-shot Gumbel top-k selection and row-masked
// Gaussian noise.

#ifndef SPARSE_DP_MECHANISMS_H_
#define SPARSE_DP_MECHANISMS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "sparse_dp/model.h"
#include "sparse_dp/rng.h"

namespace sparse_dp {

// Clip norms may be +infinity, which disables the corresponding clip.
struct NoiseConfig {
  double c1 = 1.0;      // contribution-map clip norm
  double c2 = 1.0;      // gradient clip norm
  double sigma1 = 0.0;  // contribution-map noise multiplier
  double sigma2 = 0.0;  // gradient noise multiplier
  double tau = 0.0;     // survival threshold

  absl::Status Validate() const;
};

// Activated rows of one example, one sorted list per feature.
using ActivationSet = std::vector<std::vector<int64_t>>;

// Per-feature aggregated (and optionally noised) activation counts.
struct ContributionMap {
  std::vector<std::vector<double>> values;
};

// Per-feature sorted indices of rows that survived thresholding.
struct SurvivalMask {
  std::vector<std::vector<int64_t>> rows;

  int64_t TotalRows() const;
};

// Sum over examples of the binary activation vectors, each l2-clipped to `c1`
// jointly across all features.
ContributionMap ComputeContributionMap(std::span<const ActivationSet> batch,
                                       std::span<const int64_t> vocab_sizes,
                                       double c1);

// Adds N(0, (sigma1 * c1)^2) to every coordinate. sigma1 == 0 is the identity.
ContributionMap NoiseContributionMap(ContributionMap map, double c1,
                                     double sigma1, RngStream& rng);

// Rows with value >= tau.
std::vector<int64_t> ThresholdRows(std::span<const double> values, double tau);
SurvivalMask ThresholdMask(const ContributionMap& map, double tau);

// Pr[Z >= t] for a standard normal Z.
double GaussianSurvival(double t);

// Positions in [0, n) of a Bernoulli(p) vector, sampled by drawing the gaps
// between consecutive ones from a geometric distribution. Runs in time
// proportional to the number of ones.
std::vector<int64_t> SampleBernoulliPositions(int64_t n, double p,
                                              RngStream& rng);

// Samples {j : V[j] >= tau} where V = V_hat + N(0, (sigma1 * c1)^2) without
// materializing the noise: rows in `nonzero` (sorted (row, V_hat) pairs) are
// sampled individually, the remaining zero rows of [0, num_rows) through
// SampleBernoulliPositions with p = Psi(tau / (sigma1 * c1)).
absl::StatusOr<std::vector<int64_t>> SampleSurvivingRows(
    std::span<const std::pair<int64_t, double>> nonzero, int64_t num_rows,
    double tau, double sigma1, double c1, RngStream& rng);

// Top-k of counts + Gumbel(1/epsilon) noise. `epsilon == nullopt` selects the
// exact top-k without noise. Ties go to the lower index. Indices are returned
// in decreasing score order.
absl::StatusOr<std::vector<int64_t>> GumbelTopK(std::span<const int64_t> counts,
                                                std::optional<double> epsilon,
                                                int64_t k, RngStream& rng);

// Splits the budget evenly over features: each feature runs GumbelTopK with
// epsilon_total / p and int(k_total / p) selections (clamped to its vocab).
absl::StatusOr<std::vector<std::vector<int64_t>>> DpTopKMultiFeature(
    const std::vector<std::vector<int64_t>>& counts,
    std::optional<double> epsilon_total, int64_t k_total, RngStream& rng);

// Restricts `sum` to `mask_rows` and adds N(0, (sigma2 * c2)^2) to every
// coordinate of those rows. Output rows are exactly the mask rows.
RowSparseGradient NoiseRows(const RowSparseGradient& sum,
                            std::span<const int64_t> mask_rows, double c2,
                            double sigma2, RngStream& rng);

}  // namespace sparse_dp

#endif  // SPARSE_DP_MECHANISMS_H_
