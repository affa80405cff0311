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

#include "sparse_dp/dataset.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "sparse_dp/key_value_config.h"
#include "sparse_dp/rng.h"

namespace sparse_dp {
namespace {

// Rough mean of log1p(exp(Z)), Z ~ N(0, 1); centers the numeric signal.
constexpr double kNumericCenter = 0.87;

std::string MetaPath(const std::string& path) { return path + ".meta"; }

template <typename T>
absl::StatusOr<std::vector<T>> Broadcast(const std::vector<T>& values,
                                         size_t count, std::string_view key) {
  if (values.size() == 1) return std::vector<T>(count, values.front());
  if (values.size() != count) {
    return absl::InvalidArgumentError(absl::StrCat(
        std::string(key), ": expected 1 or ", count, " values, got ", values.size()));
  }
  return values;
}

}  // namespace

absl::Status DatasetSpec::Validate() const {
  if (num_examples < 1) {
    return absl::InvalidArgumentError("need at least one example");
  }
  if (num_numeric < 0) {
    return absl::InvalidArgumentError("n_numeric must be nonnegative");
  }
  if (features.empty() && num_numeric == 0) {
    return absl::InvalidArgumentError("dataset has no features");
  }
  for (const CategoricalFeatureSpec& feature : features) {
    if (feature.vocab_size < 1) {
      return absl::InvalidArgumentError("vocab sizes must be positive");
    }
    if (!(feature.zipf_exponent >= 0.0)) {
      return absl::InvalidArgumentError("zipf exponent must be nonnegative");
    }
    if (feature.buckets_per_example < 1) {
      return absl::InvalidArgumentError("buckets_per_example must be >= 1");
    }
  }
  if (periods < 1 || periods > num_examples) {
    return absl::InvalidArgumentError("periods must be in [1, n_examples]");
  }
  if (drift_period >= periods) {
    return absl::InvalidArgumentError("drift_period must be < periods");
  }
  if (hot_buckets < 0) {
    return absl::InvalidArgumentError("hot_buckets must be nonnegative");
  }
  if (!(label_noise >= 0.0)) {
    return absl::InvalidArgumentError("label_noise must be nonnegative");
  }
  return absl::OkStatus();
}

absl::StatusOr<DatasetSpec> ParseDatasetSpec(const KeyValueConfig& config) {
  static constexpr std::string_view kKeys[] = {
      "n_examples",   "vocab_sizes", "zipf",
      "buckets_per_example", "n_numeric", "periods",
      "drift_period", "hot_buckets", "categorical_weight",
      "numeric_weight", "label_noise", "seed"};
  for (const auto& [key, values] : config.entries()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown dataset key '", key, "'"));
    }
  }
  DatasetSpec spec;
  absl::StatusOr<int64_t> n = config.Int("n_examples", spec.num_examples);
  if (!n.ok()) return n.status();
  spec.num_examples = *n;
  if (config.Has("vocab_sizes")) {
    absl::StatusOr<std::vector<int64_t>> sizes = config.Ints("vocab_sizes");
    if (!sizes.ok()) return sizes.status();
    spec.features.assign(sizes->size(), CategoricalFeatureSpec{});
    for (size_t f = 0; f < sizes->size(); ++f) {
      spec.features[f].vocab_size = (*sizes)[f];
    }
  }
  const size_t p = spec.features.size();
  if (config.Has("zipf")) {
    absl::StatusOr<std::vector<double>> zipf = config.Doubles("zipf");
    if (!zipf.ok()) return zipf.status();
    absl::StatusOr<std::vector<double>> all = Broadcast(*zipf, p, "zipf");
    if (!all.ok()) return all.status();
    for (size_t f = 0; f < p; ++f) spec.features[f].zipf_exponent = (*all)[f];
  }
  if (config.Has("buckets_per_example")) {
    absl::StatusOr<std::vector<int64_t>> counts =
        config.Ints("buckets_per_example");
    if (!counts.ok()) return counts.status();
    absl::StatusOr<std::vector<int64_t>> all =
        Broadcast(*counts, p, "buckets_per_example");
    if (!all.ok()) return all.status();
    for (size_t f = 0; f < p; ++f) {
      spec.features[f].buckets_per_example = static_cast<int>((*all)[f]);
    }
  }
  struct IntField {
    const char* key;
    int* target;
  };
  for (IntField field : {IntField{"n_numeric", &spec.num_numeric},
                         IntField{"periods", &spec.periods},
                         IntField{"drift_period", &spec.drift_period},
                         IntField{"hot_buckets", &spec.hot_buckets}}) {
    absl::StatusOr<int64_t> value = config.Int(field.key, *field.target);
    if (!value.ok()) return value.status();
    *field.target = static_cast<int>(*value);
  }
  struct DoubleField {
    const char* key;
    double* target;
  };
  for (DoubleField field :
       {DoubleField{"categorical_weight", &spec.categorical_weight_scale},
        DoubleField{"numeric_weight", &spec.numeric_weight_scale},
        DoubleField{"label_noise", &spec.label_noise}}) {
    absl::StatusOr<double> value = config.Double(field.key, *field.target);
    if (!value.ok()) return value.status();
    *field.target = *value;
  }
  absl::StatusOr<int64_t> seed =
      config.Int("seed", static_cast<int64_t>(spec.seed));
  if (!seed.ok()) return seed.status();
  spec.seed = static_cast<uint64_t>(*seed);
  if (absl::Status status = spec.Validate(); !status.ok()) return status;
  return spec;
}

std::span<const Example> Dataset::Period(int index, int count) const {
  const int64_t n = static_cast<int64_t>(examples.size());
  const int64_t begin = n * index / count;
  const int64_t end = n * (index + 1) / count;
  return std::span<const Example>(examples).subspan(begin, end - begin);
}

int64_t DriftBucket(int64_t bucket, int64_t vocab_size) {
  return (bucket + vocab_size / 2) % vocab_size;
}

absl::StatusOr<GeneratedDataset> GenerateDataset(const DatasetSpec& spec) {
  if (absl::Status status = spec.Validate(); !status.ok()) return status;
  RngStream init(spec.seed, RngPurpose::kInit);
  RngStream sampling(spec.seed, RngPurpose::kSampling);

  const size_t p = spec.features.size();
  GeneratedDataset out;
  out.data.num_numeric = spec.num_numeric;
  std::vector<std::discrete_distribution<int64_t>> zipf;
  // Teacher weight of each bucket id (nonzero only on hot buckets).
  std::vector<std::vector<double>> weights(p);
  for (size_t f = 0; f < p; ++f) {
    const CategoricalFeatureSpec& feature = spec.features[f];
    out.data.vocab_sizes.push_back(feature.vocab_size);
    std::vector<double> mass(feature.vocab_size);
    for (int64_t r = 0; r < feature.vocab_size; ++r) {
      mass[r] = std::pow(static_cast<double>(r + 1), -feature.zipf_exponent);
    }
    zipf.emplace_back(mass.begin(), mass.end());
    std::vector<int64_t> permutation(feature.vocab_size);
    std::iota(permutation.begin(), permutation.end(), 0);
    std::shuffle(permutation.begin(), permutation.end(), init.engine());
    out.rank_to_bucket.push_back(std::move(permutation));
    weights[f].assign(feature.vocab_size, 0.0);
    const int64_t hot = std::min<int64_t>(spec.hot_buckets, feature.vocab_size);
    for (int64_t r = 0; r < hot; ++r) {
      weights[f][r] = spec.categorical_weight_scale * init.Normal();
    }
  }
  std::vector<double> numeric_weights(spec.num_numeric);
  for (double& w : numeric_weights) w = spec.numeric_weight_scale * init.Normal();

  out.data.examples.reserve(spec.num_examples);
  out.teacher_logits.reserve(spec.num_examples);
  for (int64_t i = 0; i < spec.num_examples; ++i) {
    const int period = static_cast<int>(i * spec.periods / spec.num_examples);
    const bool drifted = spec.drift_period >= 0 && period >= spec.drift_period;
    Example example;
    double logit = 0.0;
    example.categorical.resize(p);
    for (size_t f = 0; f < p; ++f) {
      std::vector<int64_t> ranks;
      for (int draw = 0; draw < spec.features[f].buckets_per_example; ++draw) {
        ranks.push_back(zipf[f](sampling.engine()));
      }
      std::sort(ranks.begin(), ranks.end());
      ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
      for (int64_t rank : ranks) {
        logit += weights[f][rank];
        int64_t bucket = out.rank_to_bucket[f][rank];
        if (drifted) bucket = DriftBucket(bucket, spec.features[f].vocab_size);
        example.categorical[f].push_back(bucket);
      }
    }
    example.numeric.resize(spec.num_numeric);
    for (int k = 0; k < spec.num_numeric; ++k) {
      const double raw = std::round(std::exp(sampling.Normal()) * 1e6) / 1e6;
      example.numeric[k] = std::log1p(raw);
      logit += numeric_weights[k] * (example.numeric[k] - kNumericCenter);
    }
    const double u = sampling.Uniform();
    const double noisy = logit + spec.label_noise * std::log(u / (1.0 - u));
    example.label = noisy > 0.0 ? 1 : 0;
    NormalizeExample(example);
    out.data.examples.push_back(std::move(example));
    out.teacher_logits.push_back(logit);
  }
  return out;
}

absl::Status WriteDatasetCsv(const Dataset& data, std::ostream& out) {
  std::vector<std::string> header = {"label"};
  for (int k = 0; k < data.num_numeric; ++k) {
    header.push_back(absl::StrCat("num_", k));
  }
  for (size_t f = 0; f < data.vocab_sizes.size(); ++f) {
    header.push_back(absl::StrCat("cat_", f));
  }
  out << absl::StrJoin(header, ",") << "\n";
  for (const Example& example : data.examples) {
    out << example.label;
    for (double v : example.numeric) {
      out << "," << absl::StrFormat("%.6f", std::expm1(v));
    }
    for (const auto& buckets : example.categorical) {
      out << "," << absl::StrJoin(buckets, ";");
    }
    out << "\n";
  }
  if (!out) return absl::DataLossError("write failed");
  return absl::OkStatus();
}

absl::Status WriteDatasetFile(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  if (absl::Status status = WriteDatasetCsv(data, out); !status.ok()) {
    return status;
  }
  std::ofstream meta(MetaPath(path));
  if (!meta) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  meta << "vocab_sizes=" << absl::StrJoin(data.vocab_sizes, ",") << "\n";
  if (!meta) return absl::DataLossError("write failed");
  return absl::OkStatus();
}

absl::StatusOr<Dataset> ReadDatasetCsv(std::istream& in,
                                       std::vector<int64_t> vocab_sizes) {
  std::string line;
  if (!std::getline(in, line)) {
    return absl::InvalidArgumentError("missing header line");
  }
  Dataset data;
  int num_categorical = 0;
  std::vector<std::string> header = absl::StrSplit(line, ',');
  if (header.empty() || header.front() != "label") {
    return absl::InvalidArgumentError("header must start with 'label'");
  }
  for (size_t i = 1; i < header.size(); ++i) {
    if (header[i].starts_with("num_")) {
      ++data.num_numeric;
    } else if (header[i].starts_with("cat_")) {
      ++num_categorical;
    } else {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown column '", header[i], "'"));
    }
  }
  std::vector<int64_t> max_bucket(num_categorical, -1);
  int64_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::vector<std::string> fields = absl::StrSplit(line, ',');
    if (fields.size() != header.size()) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_number, ": expected ", header.size(),
                       " fields, got ", fields.size()));
    }
    Example example;
    absl::StatusOr<int64_t> label = ParseInt(fields[0]);
    if (!label.ok() || (*label != 0 && *label != 1)) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_number, ": label must be 0 or 1"));
    }
    example.label = static_cast<int>(*label);
    for (int k = 0; k < data.num_numeric; ++k) {
      absl::StatusOr<double> raw = ParseDouble(fields[1 + k]);
      if (!raw.ok() || *raw <= -1.0) {
        return absl::InvalidArgumentError(
            absl::StrCat("line ", line_number, ": bad numeric field"));
      }
      example.numeric.push_back(std::log1p(*raw));
    }
    example.categorical.resize(num_categorical);
    for (int f = 0; f < num_categorical; ++f) {
      const std::string& field = fields[1 + data.num_numeric + f];
      if (field.empty()) continue;
      for (absl::string_view token : absl::StrSplit(field, ';')) {
        absl::StatusOr<int64_t> bucket =
            ParseInt(std::string_view(token.data(), token.size()));
        if (!bucket.ok() || *bucket < 0) {
          return absl::InvalidArgumentError(
              absl::StrCat("line ", line_number, ": bad bucket '", token, "'"));
        }
        example.categorical[f].push_back(*bucket);
        max_bucket[f] = std::max(max_bucket[f], *bucket);
      }
    }
    NormalizeExample(example);
    data.examples.push_back(std::move(example));
  }
  if (vocab_sizes.empty()) {
    for (int64_t m : max_bucket) vocab_sizes.push_back(std::max<int64_t>(m + 1, 1));
  }
  if (static_cast<int>(vocab_sizes.size()) != num_categorical) {
    return absl::InvalidArgumentError("vocabulary sizes do not match columns");
  }
  for (int f = 0; f < num_categorical; ++f) {
    if (max_bucket[f] >= vocab_sizes[f]) {
      return absl::InvalidArgumentError(
          absl::StrCat("bucket ", max_bucket[f], " exceeds vocab size ",
                       vocab_sizes[f], " of feature ", f));
    }
  }
  data.vocab_sizes = std::move(vocab_sizes);
  return data;
}

absl::StatusOr<Dataset> ReadDatasetFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::vector<int64_t> vocab_sizes;
  if (std::ifstream meta(MetaPath(path)); meta) {
    std::string text((std::istreambuf_iterator<char>(meta)),
                     std::istreambuf_iterator<char>());
    absl::StatusOr<KeyValueConfig> config = KeyValueConfig::Parse(text);
    if (!config.ok()) return config.status();
    absl::StatusOr<std::vector<int64_t>> sizes = config->Ints("vocab_sizes");
    if (!sizes.ok()) return sizes.status();
    vocab_sizes = *std::move(sizes);
  }
  return ReadDatasetCsv(in, std::move(vocab_sizes));
}

}  // namespace sparse_dp
