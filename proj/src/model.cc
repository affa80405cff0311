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

#include "sparse_dp/model.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"

namespace sparse_dp {
namespace {

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool AllFinite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

absl::StatusOr<ModelParams> AllocateModel(const ModelConfig& config) {
  if (absl::Status status = ValidateModelConfig(config); !status.ok()) {
    return status;
  }
  ModelParams params;
  params.features = config.features;
  params.num_numeric = config.num_numeric;
  for (const FeatureSpec& feature : config.features) {
    EmbeddingTable table;
    table.num_rows = feature.vocab_size;
    table.dim = feature.embedding_dim;
    table.values.assign(feature.vocab_size * feature.embedding_dim, 0.0);
    params.tables.push_back(std::move(table));
  }
  int fan_in = params.HeadInputDim();
  std::vector<int> widths = config.hidden_widths;
  widths.push_back(1);
  for (int width : widths) {
    DenseLayer layer;
    layer.input_dim = fan_in;
    layer.output_dim = width;
    layer.weights.assign(static_cast<size_t>(fan_in) * width, 0.0);
    layer.bias.assign(width, 0.0);
    params.layers.push_back(std::move(layer));
    fan_in = width;
  }
  return params;
}

}  // namespace

void NormalizeExample(Example& example) {
  for (std::vector<int64_t>& buckets : example.categorical) {
    std::sort(buckets.begin(), buckets.end());
    buckets.erase(std::unique(buckets.begin(), buckets.end()), buckets.end());
  }
}

int ModelParams::HeadInputDim() const {
  int dim = num_numeric;
  for (const FeatureSpec& feature : features) dim += feature.embedding_dim;
  return dim;
}

int64_t ModelParams::EmbeddingParameterCount() const {
  int64_t count = 0;
  for (const FeatureSpec& feature : features) {
    count += feature.vocab_size * feature.embedding_dim;
  }
  return count;
}

int64_t ModelParams::HeadParameterCount() const {
  int64_t count = 0;
  for (const DenseLayer& layer : layers) {
    count += static_cast<int64_t>(layer.weights.size() + layer.bias.size());
  }
  return count;
}

std::vector<int64_t> ModelParams::VocabSizes() const {
  std::vector<int64_t> sizes;
  sizes.reserve(features.size());
  for (const FeatureSpec& feature : features) sizes.push_back(feature.vocab_size);
  return sizes;
}

absl::Status ValidateModelConfig(const ModelConfig& config) {
  if (config.num_numeric < 0) {
    return absl::InvalidArgumentError("num_numeric must be nonnegative");
  }
  std::vector<int> ids;
  for (const FeatureSpec& feature : config.features) {
    if (feature.vocab_size < 1 || feature.embedding_dim < 1) {
      return absl::InvalidArgumentError(absl::StrCat(
          "feature ", feature.feature_id,
          ": vocab size and embedding dim must be positive"));
    }
    ids.push_back(feature.feature_id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    return absl::InvalidArgumentError("feature ids must be unique");
  }
  for (int width : config.hidden_widths) {
    if (width < 1) {
      return absl::InvalidArgumentError("hidden widths must be positive");
    }
  }
  if (config.features.empty() && config.num_numeric == 0) {
    return absl::InvalidArgumentError("model has no inputs");
  }
  return absl::OkStatus();
}

absl::StatusOr<ModelParams> InitializeModel(const ModelConfig& config,
                                            RngStream& rng) {
  absl::StatusOr<ModelParams> params = AllocateModel(config);
  if (!params.ok()) return params.status();
  for (EmbeddingTable& table : params->tables) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(table.dim));
    for (double& v : table.values) v = bound * (2.0 * rng.Uniform() - 1.0);
  }
  for (DenseLayer& layer : params->layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.input_dim));
    for (double& v : layer.weights) v = bound * (2.0 * rng.Uniform() - 1.0);
    for (double& v : layer.bias) v = bound * (2.0 * rng.Uniform() - 1.0);
  }
  return params;
}

absl::StatusOr<ModelParams> ZeroModel(const ModelConfig& config) {
  return AllocateModel(config);
}

std::vector<double>& RowSparseGradient::MutableRow(int64_t row) {
  auto [it, inserted] = rows_.try_emplace(row);
  if (inserted) it->second.assign(dim_, 0.0);
  return it->second;
}

void RowSparseGradient::AddToRow(int64_t row, std::span<const double> values,
                                 double scale) {
  std::vector<double>& target = MutableRow(row);
  for (int i = 0; i < dim_; ++i) target[i] += scale * values[i];
}

void RowSparseGradient::Add(const RowSparseGradient& other, double scale) {
  for (const auto& [row, values] : other.rows_) AddToRow(row, values, scale);
}

void RowSparseGradient::PruneZeroRows() {
  std::erase_if(rows_, [](const auto& entry) {
    return std::all_of(entry.second.begin(), entry.second.end(),
                       [](double v) { return v == 0.0; });
  });
}

void RowSparseGradient::Scale(double factor) {
  for (auto& [row, values] : rows_) {
    for (double& v : values) v *= factor;
  }
}

double RowSparseGradient::SquaredNorm() const {
  double sum = 0.0;
  for (const auto& [row, values] : rows_) {
    for (double v : values) sum += v * v;
  }
  return sum;
}

std::vector<double> RowSparseGradient::Densify() const {
  std::vector<double> dense(num_rows_ * dim_, 0.0);
  for (const auto& [row, values] : rows_) {
    std::copy(values.begin(), values.end(), dense.begin() + row * dim_);
  }
  return dense;
}

double PerExampleGradient::SquaredNorm() const {
  double sum = 0.0;
  for (const RowSparseGradient& part : embedding) sum += part.SquaredNorm();
  for (double v : head) sum += v * v;
  return sum;
}

double PerExampleGradient::Norm() const { return std::sqrt(SquaredNorm()); }

void PerExampleGradient::Scale(double factor) {
  for (RowSparseGradient& part : embedding) part.Scale(factor);
  for (double& v : head) v *= factor;
}

void PerExampleGradient::Add(const PerExampleGradient& other, double scale) {
  for (size_t f = 0; f < embedding.size(); ++f) {
    embedding[f].Add(other.embedding[f], scale);
  }
  for (size_t i = 0; i < head.size(); ++i) head[i] += scale * other.head[i];
}

PerExampleGradient ZeroGradient(const ModelParams& params) {
  PerExampleGradient gradient;
  for (const EmbeddingTable& table : params.tables) {
    gradient.embedding.emplace_back(table.num_rows, table.dim);
  }
  gradient.head.assign(params.HeadParameterCount(), 0.0);
  return gradient;
}

absl::Status ValidateExample(const ModelParams& params,
                             const Example& example) {
  if (example.label != 0 && example.label != 1) {
    return absl::InvalidArgumentError("label must be 0 or 1");
  }
  if (static_cast<int>(example.numeric.size()) != params.num_numeric) {
    return absl::InvalidArgumentError(
        absl::StrCat("expected ", params.num_numeric, " numeric features, got ",
                     example.numeric.size()));
  }
  if (example.categorical.size() != params.features.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("expected ", params.features.size(),
                     " categorical features, got ", example.categorical.size()));
  }
  for (size_t f = 0; f < params.features.size(); ++f) {
    for (int64_t bucket : example.categorical[f]) {
      if (bucket < 0 || bucket >= params.features[f].vocab_size) {
        return absl::InvalidArgumentError(
            absl::StrCat("bucket ", bucket, " out of range for feature ", f,
                         " with vocab size ", params.features[f].vocab_size));
      }
    }
  }
  return absl::OkStatus();
}

void EmbeddingLookup(const EmbeddingTable& table, Pooling pooling,
                     std::span<const int64_t> buckets, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (int64_t bucket : buckets) {
    std::span<const double> row = table.Row(bucket);
    for (int i = 0; i < table.dim; ++i) out[i] += row[i];
  }
  if (pooling == Pooling::kMean && !buckets.empty()) {
    const double inv = 1.0 / static_cast<double>(buckets.size());
    for (double& v : out) v *= inv;
  }
}

RowSparseGradient EmbeddingBackward(int64_t num_rows, int dim, Pooling pooling,
                                    std::span<const int64_t> buckets,
                                    std::span<const double> upstream) {
  RowSparseGradient gradient(num_rows, dim);
  if (buckets.empty()) return gradient;
  const double scale = pooling == Pooling::kMean
                           ? 1.0 / static_cast<double>(buckets.size())
                           : 1.0;
  for (int64_t bucket : buckets) gradient.AddToRow(bucket, upstream, scale);
  gradient.PruneZeroRows();
  return gradient;
}

absl::StatusOr<ForwardCache> Forward(const ModelParams& params,
                                     const Example& example) {
  if (absl::Status status = ValidateExample(params, example); !status.ok()) {
    return status;
  }
  ForwardCache cache;
  cache.input.assign(params.HeadInputDim(), 0.0);
  int offset = 0;
  for (size_t f = 0; f < params.tables.size(); ++f) {
    const EmbeddingTable& table = params.tables[f];
    EmbeddingLookup(table, params.features[f].pooling, example.categorical[f],
                    std::span<double>(cache.input).subspan(offset, table.dim));
    offset += table.dim;
  }
  std::copy(example.numeric.begin(), example.numeric.end(),
            cache.input.begin() + offset);

  const std::vector<double>* current = &cache.input;
  cache.pre_activations.resize(params.layers.size());
  cache.activations.resize(params.layers.size());
  for (size_t l = 0; l < params.layers.size(); ++l) {
    const DenseLayer& layer = params.layers[l];
    std::vector<double>& pre = cache.pre_activations[l];
    pre = layer.bias;
    for (int o = 0; o < layer.output_dim; ++o) {
      const double* w = layer.weights.data() +
                        static_cast<size_t>(o) * layer.input_dim;
      double sum = 0.0;
      for (int i = 0; i < layer.input_dim; ++i) sum += w[i] * (*current)[i];
      pre[o] += sum;
    }
    std::vector<double>& act = cache.activations[l];
    act = pre;
    if (l + 1 < params.layers.size()) {
      for (double& v : act) v = std::max(v, 0.0);
    }
    current = &act;
  }
  cache.logit = cache.activations.back()[0];
  if (!std::isfinite(cache.logit)) {
    return absl::OutOfRangeError("non-finite logit");
  }
  return cache;
}

double BinaryCrossEntropyWithLogit(double logit, int label) {
  return std::max(logit, 0.0) - logit * label +
         std::log1p(std::exp(-std::abs(logit)));
}

absl::StatusOr<LossAndGradient> ComputeLossAndGradient(
    const ModelParams& params, const Example& example) {
  absl::StatusOr<ForwardCache> cache = Forward(params, example);
  if (!cache.ok()) return cache.status();

  LossAndGradient result;
  result.loss = BinaryCrossEntropyWithLogit(cache->logit, example.label);
  result.gradient.head.assign(params.HeadParameterCount(), 0.0);

  std::vector<int64_t> layer_offsets(params.layers.size());
  int64_t offset = 0;
  for (size_t l = 0; l < params.layers.size(); ++l) {
    layer_offsets[l] = offset;
    offset += static_cast<int64_t>(params.layers[l].weights.size() +
                                   params.layers[l].bias.size());
  }

  std::vector<double> delta = {Sigmoid(cache->logit) - example.label};
  for (size_t l = params.layers.size(); l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    const std::vector<double>& layer_input =
        l == 0 ? cache->input : cache->activations[l - 1];
    double* grad_w = result.gradient.head.data() + layer_offsets[l];
    double* grad_b = grad_w + layer.weights.size();
    std::vector<double> delta_in(layer.input_dim, 0.0);
    for (int o = 0; o < layer.output_dim; ++o) {
      const double d = delta[o];
      grad_b[o] = d;
      if (d == 0.0) continue;
      const size_t row = static_cast<size_t>(o) * layer.input_dim;
      for (int i = 0; i < layer.input_dim; ++i) {
        grad_w[row + i] = d * layer_input[i];
        delta_in[i] += layer.weights[row + i] * d;
      }
    }
    if (l > 0) {
      const std::vector<double>& pre = cache->pre_activations[l - 1];
      for (size_t i = 0; i < delta_in.size(); ++i) {
        if (pre[i] <= 0.0) delta_in[i] = 0.0;
      }
    }
    delta = std::move(delta_in);
  }

  // `delta` now holds the gradient with respect to the head input.
  int input_offset = 0;
  for (size_t f = 0; f < params.tables.size(); ++f) {
    const EmbeddingTable& table = params.tables[f];
    result.gradient.embedding.push_back(EmbeddingBackward(
        table.num_rows, table.dim, params.features[f].pooling,
        example.categorical[f],
        std::span<const double>(delta).subspan(input_offset, table.dim)));
    input_offset += table.dim;
  }
  if (!std::isfinite(result.loss) || !AllFinite(result.gradient.head) ||
      !AllFinite(delta)) {
    return absl::OutOfRangeError("non-finite gradient");
  }
  return result;
}

absl::StatusOr<PerExampleGradient> ComputePerExampleGradient(
    const ModelParams& params, const Example& example) {
  absl::StatusOr<LossAndGradient> result =
      ComputeLossAndGradient(params, example);
  if (!result.ok()) return result.status();
  return std::move(result->gradient);
}

double ClipGradientInPlace(PerExampleGradient& gradient, double clip_norm) {
  const double norm = gradient.Norm();
  if (norm <= clip_norm) return norm;
  // Rounding can leave the rescaled norm a few ulps above the bound; step the
  // scale down until it is not, so clipping is exactly idempotent.
  double scale = clip_norm / norm;
  PerExampleGradient scaled = gradient;
  scaled.Scale(scale);
  while (scaled.Norm() > clip_norm) {
    scale = std::nextafter(scale, 0.0);
    scaled = gradient;
    scaled.Scale(scale);
  }
  gradient = std::move(scaled);
  return norm;
}

PerExampleGradient ClipGradient(const PerExampleGradient& gradient,
                                double clip_norm) {
  PerExampleGradient clipped = gradient;
  ClipGradientInPlace(clipped, clip_norm);
  return clipped;
}

absl::Status ApplyUpdate(ModelParams& params, const PerExampleGradient& update,
                         double learning_rate) {
  if (update.embedding.size() != params.tables.size() ||
      static_cast<int64_t>(update.head.size()) != params.HeadParameterCount()) {
    return absl::InvalidArgumentError("update shape does not match model");
  }
  for (size_t f = 0; f < params.tables.size(); ++f) {
    EmbeddingTable& table = params.tables[f];
    const RowSparseGradient& part = update.embedding[f];
    if (part.num_rows() != table.num_rows || part.dim() != table.dim) {
      return absl::InvalidArgumentError(
          absl::StrCat("embedding update shape mismatch for feature ", f));
    }
    if (!part.empty() && part.rows().rbegin()->first >= table.num_rows) {
      return absl::InvalidArgumentError("embedding update row out of range");
    }
  }
  for (size_t f = 0; f < params.tables.size(); ++f) {
    EmbeddingTable& table = params.tables[f];
    for (const auto& [row, values] : update.embedding[f].rows()) {
      std::span<double> target = table.Row(row);
      for (int i = 0; i < table.dim; ++i) {
        target[i] -= learning_rate * values[i];
      }
    }
  }
  const double* u = update.head.data();
  for (DenseLayer& layer : params.layers) {
    for (double& w : layer.weights) w -= learning_rate * *u++;
    for (double& b : layer.bias) b -= learning_rate * *u++;
  }
  return absl::OkStatus();
}

std::vector<double> FlattenHead(const ModelParams& params) {
  std::vector<double> flat;
  flat.reserve(params.HeadParameterCount());
  for (const DenseLayer& layer : params.layers) {
    flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

}  // namespace sparse_dp
