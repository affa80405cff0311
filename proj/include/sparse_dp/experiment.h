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

#ifndef SPARSE_DP_EXPERIMENT_H_
#define SPARSE_DP_EXPERIMENT_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "sparse_dp/accountant.h"
#include "sparse_dp/dataset.h"
#include "sparse_dp/key_value_config.h"
#include "sparse_dp/model.h"
#include "sparse_dp/optimizers.h"

namespace sparse_dp {

struct ExperimentConfig {
  OptimizerConfig optimizer;
  // An infinite epsilon trains without noise. A nonpositive delta means
  // 1 / (number of training examples).
  BudgetSpec budget{.epsilon = 1.0, .delta = 0.0};
  // sigma1 / sigma2 for the adaptive algorithms.
  double sigma_ratio = 1.0;
  // Explicit noise multipliers; these bypass calibration.
  std::optional<double> sigma1_override;
  std::optional<double> sigma2_override;
  int embedding_dim = 8;
  std::vector<int> hidden_widths = {64, 64};
  Pooling pooling = Pooling::kSum;
  // Trailing fraction of the examples held out for evaluation.
  double eval_fraction = 0.2;
  uint64_t seed = 1;

  absl::Status Validate() const;
};

struct ExperimentRecord {
  std::string algorithm;
  double epsilon = 0.0;
  double delta = 0.0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double tau = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  int64_t k = 0;
  double accuracy = 0.0;
  double auc = 0.0;
  double mean_noised_coords = 0.0;
  // Total parameter count over mean noised coordinates per step.
  double reduction_factor = 0.0;
  // Embedding parameter count over mean noised embedding coordinates.
  double embedding_reduction_factor = 0.0;
  double wall_ms = 0.0;
  // Streaming refresh index; -1 for batch runs.
  int period = -1;
  double mean_loss = 0.0;
};

// Noise multipliers resolved for one configuration.
struct CalibratedNoise {
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  // Budget left for training after any selection cost.
  double training_epsilon = 0.0;
  double delta = 0.0;
};

// Calibrates sigma for `steps` Poisson-subsampled steps at rate `gamma`.
// Results are memoized per process.
absl::StatusOr<CalibratedNoise> CalibrateNoise(const ExperimentConfig& config,
                                               double gamma, int64_t steps,
                                               int64_t num_train);

// Ordered bucket counts for frequency-based selection.
std::vector<std::vector<int64_t>> CountBuckets(std::span<const Example> examples,
                                               std::span<const int64_t> vocab_sizes);

// Per-period bucket counts summed over the periods seen so far; updated only
// at period boundaries.
class RunningBucketCounts {
 public:
  explicit RunningBucketCounts(std::vector<int64_t> vocab_sizes);

  void AddPeriod(std::span<const Example> period);
  int periods_seen() const { return periods_seen_; }
  const std::vector<std::vector<int64_t>>& counts() const { return counts_; }

 private:
  std::vector<int64_t> vocab_sizes_;
  std::vector<std::vector<int64_t>> counts_;
  int periods_seen_ = 0;
};

// Trains on the leading examples and evaluates on the held-out tail.
absl::StatusOr<ExperimentRecord> RunExperiment(const Dataset& data,
                                               const ExperimentConfig& config);

struct StreamingConfig {
  int periods = 2;
  // Periods per model refresh.
  int period_length = 1;

  absl::Status Validate() const;
};

// Splits the data into `periods` contiguous periods grouped into chunks of
// `period_length`. Refresh r trains the persistent model on chunk r and
// evaluates it on chunk r + 1.
absl::StatusOr<std::vector<ExperimentRecord>> RunStreaming(
    const Dataset& data, const StreamingConfig& streaming,
    const ExperimentConfig& config);

// Mean accuracy over streaming refreshes.
double MeanAccuracy(std::span<const ExperimentRecord> records);

// Sweep grid keys: algo, epsilon, delta, sigma_ratio, tau, c1, c2, k, lr,
// batch, steps, freq_source, dpfest_epsilon, seed. Missing keys keep the
// base configuration.
absl::StatusOr<std::vector<ExperimentConfig>> ExpandGrid(
    const KeyValueConfig& grid, const ExperimentConfig& base);

// Candidate values for the adaptive-algorithm sweeps.
std::vector<double> DefaultSigmaRatios();
std::vector<double> DefaultThresholds();
std::vector<double> DefaultContributionClips();

absl::StatusOr<std::vector<ExperimentRecord>> RunSweep(
    const Dataset& data, std::span<const ExperimentConfig> cells);

struct FrontierPoint {
  double utility_loss = 0.0;
  // Zero when no record qualifies.
  double best_reduction = 0.0;
};

// Best reduction among records whose accuracy is within each allowed loss
// of `baseline_accuracy`.
std::vector<FrontierPoint> UtilityReductionFrontier(
    std::span<const ExperimentRecord> records, double baseline_accuracy,
    std::span<const double> utility_losses, bool embedding_only = false);

inline constexpr char kRecordCsvHeader[] =
    "algorithm,epsilon,delta,sigma1,sigma2,tau,c1,c2,k,accuracy,auc,"
    "mean_noised_coords,reduction_factor,wall_ms";

void WriteRecordsCsv(std::span<const ExperimentRecord> records,
                     std::ostream& out);
absl::Status WriteRecordsFile(std::span<const ExperimentRecord> records,
                              const std::string& path);

}  // namespace sparse_dp

#endif  // SPARSE_DP_EXPERIMENT_H_
