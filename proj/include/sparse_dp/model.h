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

// Embedding classifier: one embedding table per categorical feature feeding a
// small ReLU head with a single logit. Forward and backward passes are written
// by hand so that embedding gradients stay row-sparse.

#ifndef SPARSE_DP_MODEL_H_
#define SPARSE_DP_MODEL_H_

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "sparse_dp/rng.h"

namespace sparse_dp {

enum class Pooling { kSum, kMean };

struct FeatureSpec {
  int feature_id = 0;
  int64_t vocab_size = 1;
  int embedding_dim = 1;
  // How multi-valued inputs are combined.
  Pooling pooling = Pooling::kSum;
};

struct Example {
  int label = 0;
  // Already log1p-transformed.
  std::vector<double> numeric;
  // Activated bucket indices, one list per feature. Sorted and unique after
  // NormalizeExample().
  std::vector<std::vector<int64_t>> categorical;
};

// Sorts each bucket list and drops duplicates.
void NormalizeExample(Example& example);

struct ModelConfig {
  std::vector<FeatureSpec> features;
  int num_numeric = 0;
  std::vector<int> hidden_widths = {64, 64};
};

struct EmbeddingTable {
  int64_t num_rows = 0;
  int dim = 0;
  std::vector<double> values;  // row-major, num_rows x dim

  std::span<double> Row(int64_t row) {
    return {values.data() + row * dim, static_cast<size_t>(dim)};
  }
  std::span<const double> Row(int64_t row) const {
    return {values.data() + row * dim, static_cast<size_t>(dim)};
  }
};

struct DenseLayer {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<double> weights;  // row-major, output_dim x input_dim
  std::vector<double> bias;
};

// Parameters of the whole model. `layers` ends with the 1-unit output layer;
// every earlier layer is followed by a ReLU.
struct ModelParams {
  std::vector<FeatureSpec> features;
  int num_numeric = 0;
  std::vector<EmbeddingTable> tables;
  std::vector<DenseLayer> layers;

  int HeadInputDim() const;
  int64_t EmbeddingParameterCount() const;
  // Head parameters, flattened layer by layer as weights then bias.
  int64_t HeadParameterCount() const;
  int64_t ParameterCount() const {
    return EmbeddingParameterCount() + HeadParameterCount();
  }
  std::vector<int64_t> VocabSizes() const;
};

absl::Status ValidateModelConfig(const ModelConfig& config);

// Embedding rows ~ U(-1/sqrt(d), 1/sqrt(d)), dense weights and biases
// ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
absl::StatusOr<ModelParams> InitializeModel(const ModelConfig& config,
                                            RngStream& rng);

// All parameters zero.
absl::StatusOr<ModelParams> ZeroModel(const ModelConfig& config);

// Embedding-table gradient stored as (row index -> dense row) pairs.
class RowSparseGradient {
 public:
  RowSparseGradient() = default;
  RowSparseGradient(int64_t num_rows, int dim) : num_rows_(num_rows), dim_(dim) {}

  int64_t num_rows() const { return num_rows_; }
  int dim() const { return dim_; }
  const std::map<int64_t, std::vector<double>>& rows() const { return rows_; }
  size_t row_count() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  bool HasRow(int64_t row) const { return rows_.contains(row); }

  // Returns the row, inserting zeros if absent.
  std::vector<double>& MutableRow(int64_t row);
  // row += scale * values
  void AddToRow(int64_t row, std::span<const double> values,
                double scale = 1.0);
  // this += scale * other, row by row.
  void Add(const RowSparseGradient& other, double scale = 1.0);
  void EraseRow(int64_t row) { rows_.erase(row); }
  // Removes rows whose entries are all exactly zero.
  void PruneZeroRows();
  void Scale(double factor);
  double SquaredNorm() const;
  // Row-major num_rows x dim matrix.
  std::vector<double> Densify() const;

 private:
  int64_t num_rows_ = 0;
  int dim_ = 0;
  std::map<int64_t, std::vector<double>> rows_;
};

// Gradient of one example (or a sum of examples) with respect to every
// parameter: one sparse part per embedding table plus the flattened head.
struct PerExampleGradient {
  std::vector<RowSparseGradient> embedding;
  std::vector<double> head;

  double SquaredNorm() const;
  double Norm() const;
  void Scale(double factor);
  // this += scale * other. Shapes must match.
  void Add(const PerExampleGradient& other, double scale = 1.0);
};

// A gradient with the model's shape and no nonzero entries.
PerExampleGradient ZeroGradient(const ModelParams& params);

// Values recorded during the forward pass for use by the backward pass.
struct ForwardCache {
  double logit = 0.0;
  // Concatenated pooled embeddings followed by numeric features.
  std::vector<double> input;
  // Per layer: pre-activation outputs and post-activation outputs.
  std::vector<std::vector<double>> pre_activations;
  std::vector<std::vector<double>> activations;
};

absl::Status ValidateExample(const ModelParams& params, const Example& example);

// Writes the pooled embedding of `buckets` into `out` (size table.dim) using
// row gathers.
void EmbeddingLookup(const EmbeddingTable& table, Pooling pooling,
                     std::span<const int64_t> buckets, std::span<double> out);

// Scatter of the upstream gradient into the rows of `buckets`.
RowSparseGradient EmbeddingBackward(int64_t num_rows, int dim, Pooling pooling,
                                    std::span<const int64_t> buckets,
                                    std::span<const double> upstream);

absl::StatusOr<ForwardCache> Forward(const ModelParams& params,
                                     const Example& example);

// Numerically stable binary cross-entropy on a logit.
double BinaryCrossEntropyWithLogit(double logit, int label);

struct LossAndGradient {
  double loss = 0.0;
  PerExampleGradient gradient;
};

// Loss and per-example gradient. Embedding parts hold exactly the activated
// rows whose gradient is nonzero.
absl::StatusOr<LossAndGradient> ComputeLossAndGradient(const ModelParams& params,
                                                       const Example& example);

absl::StatusOr<PerExampleGradient> ComputePerExampleGradient(
    const ModelParams& params, const Example& example);

// Scales `gradient` in place so its global l2 norm is at most `clip_norm`.
// Returns the norm before clipping. An infinite clip norm disables clipping.
double ClipGradientInPlace(PerExampleGradient& gradient, double clip_norm);

PerExampleGradient ClipGradient(const PerExampleGradient& gradient,
                                double clip_norm);

// params -= learning_rate * update. Embedding rows are touched only where the
// update stores a row.
absl::Status ApplyUpdate(ModelParams& params, const PerExampleGradient& update,
                         double learning_rate);

// Head parameters as a flat vector, same order as PerExampleGradient::head.
std::vector<double> FlattenHead(const ModelParams& params);

}  // namespace sparse_dp

#endif  // SPARSE_DP_MODEL_H_
