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

// Synthetic click-log style data: Zipf-distributed categorical buckets,
// log-normal numeric features and labels from a planted logistic teacher.
//
// File format: a header line `label,num_0,...,cat_0,...` followed by one row
// per example, where each cat field is a ';'-separated list of bucket
// indices and numeric fields hold raw (pre-log1p) values. A sidecar
// `<file>.meta` records vocabulary sizes as key=value lines.

#ifndef SPARSE_DP_DATASET_H_
#define SPARSE_DP_DATASET_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "sparse_dp/key_value_config.h"
#include "sparse_dp/model.h"

namespace sparse_dp {

struct CategoricalFeatureSpec {
  int64_t vocab_size = 20000;
  double zipf_exponent = 1.1;
  // Draws per example; duplicates are merged.
  int buckets_per_example = 1;
};

struct DatasetSpec {
  int64_t num_examples = 50000;
  std::vector<CategoricalFeatureSpec> features =
      std::vector<CategoricalFeatureSpec>(5);
  int num_numeric = 4;
  // Contiguous periods for streaming runs.
  int periods = 1;
  // First period whose bucket ids are cyclically shifted by vocab/2; -1 for
  // no drift.
  int drift_period = -1;
  // Teacher weights live on this many most frequent buckets per feature.
  int hot_buckets = 20;
  double categorical_weight_scale = 2.0;
  double numeric_weight_scale = 1.0;
  // Scale of the logistic noise added to teacher logits.
  double label_noise = 0.1;
  uint64_t seed = 1;

  absl::Status Validate() const;
};

// Recognized keys: n_examples, vocab_sizes, zipf, buckets_per_example,
// n_numeric, periods, drift_period, hot_buckets, categorical_weight,
// numeric_weight, label_noise, seed. `zipf` and `buckets_per_example` take
// one value for all features or one per feature.
absl::StatusOr<DatasetSpec> ParseDatasetSpec(const KeyValueConfig& config);

struct Dataset {
  std::vector<Example> examples;
  int num_numeric = 0;
  std::vector<int64_t> vocab_sizes;

  // Examples of period `index` when split into `count` contiguous periods.
  std::span<const Example> Period(int index, int count) const;
};

struct GeneratedDataset {
  Dataset data;
  // Teacher logit of each example, before label noise.
  std::vector<double> teacher_logits;
  // Per feature, the bucket id of each Zipf rank (0 = most frequent) before
  // any drift shift.
  std::vector<std::vector<int64_t>> rank_to_bucket;
};

absl::StatusOr<GeneratedDataset> GenerateDataset(const DatasetSpec& spec);

// Bucket id after the drift shift.
int64_t DriftBucket(int64_t bucket, int64_t vocab_size);

absl::Status WriteDatasetCsv(const Dataset& data, std::ostream& out);
absl::Status WriteDatasetFile(const Dataset& data, const std::string& path);

// Applies log1p to numeric fields. Vocabulary sizes come from `vocab_sizes`
// when given, else from the sidecar file, else max index + 1.
absl::StatusOr<Dataset> ReadDatasetCsv(std::istream& in,
                                       std::vector<int64_t> vocab_sizes = {});
absl::StatusOr<Dataset> ReadDatasetFile(const std::string& path);

}  // namespace sparse_dp

#endif  // SPARSE_DP_DATASET_H_
