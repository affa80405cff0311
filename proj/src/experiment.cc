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

#include "sparse_dp/experiment.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "sparse_dp/accountant.h"
#include "sparse_dp/metrics.h"
#include "sparse_dp/rng.h"

namespace sparse_dp {
namespace {

using Clock = std::chrono::steady_clock;

bool IsAdaptive(Algorithm algorithm) {
  return algorithm == Algorithm::kAdaFest ||
         algorithm == Algorithm::kAdaFestPlus;
}

bool UsesSelection(Algorithm algorithm) {
  return algorithm == Algorithm::kDpFest ||
         algorithm == Algorithm::kAdaFestPlus;
}

double SelectionEpsilon(const OptimizerConfig& optimizer) {
  if (UsesSelection(optimizer.algorithm) &&
      optimizer.frequency_source == FrequencySource::kDpTopK) {
    return optimizer.dpfest_epsilon;
  }
  return 0.0;
}

absl::StatusOr<double> MemoizedSigma(double epsilon, double delta,
                                     double gamma, int64_t steps) {
  static std::mutex* mu = new std::mutex;
  static auto* cache =
      new std::map<std::tuple<double, double, double, int64_t>, double>;
  const auto key = std::make_tuple(epsilon, delta, gamma, steps);
  {
    std::lock_guard<std::mutex> lock(*mu);
    auto it = cache->find(key);
    if (it != cache->end()) return it->second;
  }
  absl::StatusOr<double> sigma = CalibrateSigma(epsilon, delta, gamma, steps);
  if (!sigma.ok()) return sigma.status();
  std::lock_guard<std::mutex> lock(*mu);
  cache->emplace(key, *sigma);
  return *sigma;
}

absl::StatusOr<ModelParams> BuildModel(const Dataset& data,
                                       const ExperimentConfig& config) {
  ModelConfig model;
  model.num_numeric = data.num_numeric;
  model.hidden_widths = config.hidden_widths;
  for (size_t f = 0; f < data.vocab_sizes.size(); ++f) {
    model.features.push_back(FeatureSpec{.feature_id = static_cast<int>(f),
                                         .vocab_size = data.vocab_sizes[f],
                                         .embedding_dim = config.embedding_dim,
                                         .pooling = config.pooling});
  }
  RngStream rng(config.seed, RngPurpose::kInit);
  return InitializeModel(model, rng);
}

struct Evaluation {
  double accuracy = 0.0;
  double auc = 0.0;
};

absl::StatusOr<Evaluation> Evaluate(const ModelParams& params,
                                    std::span<const Example> examples) {
  std::vector<double> logits;
  std::vector<int> labels;
  logits.reserve(examples.size());
  labels.reserve(examples.size());
  for (const Example& example : examples) {
    absl::StatusOr<ForwardCache> cache = Forward(params, example);
    if (!cache.ok()) return cache.status();
    logits.push_back(cache->logit);
    labels.push_back(example.label);
  }
  return Evaluation{.accuracy = Accuracy(logits, labels),
                    .auc = AreaUnderRoc(logits, labels)};
}

// Trains `params` in place on `train` and fills the training fields of a
// record.
class Trainer {
 public:
  Trainer(const ExperimentConfig& config, const CalibratedNoise& noise)
      : config_(config),
        noise_(noise),
        noise_rng_(config.seed, RngPurpose::kMechanismNoise),
        selection_rng_(config.seed, RngPurpose::kGumbel) {}

  void set_noise(const CalibratedNoise& noise) { noise_ = noise; }

  absl::Status Select(const std::vector<std::vector<int64_t>>& counts) {
    const OptimizerConfig& optimizer = config_.optimizer;
    if (!UsesSelection(optimizer.algorithm)) return absl::OkStatus();
    std::optional<double> epsilon;
    if (optimizer.frequency_source == FrequencySource::kDpTopK) {
      epsilon = optimizer.dpfest_epsilon;
    }
    absl::StatusOr<SelectedVocabulary> selected =
        DpFestSelect(counts, optimizer.dpfest_k, epsilon, selection_rng_);
    if (!selected.ok()) return selected.status();
    selected_ = *std::move(selected);
    return absl::OkStatus();
  }

  absl::Status Train(ModelParams& params, std::span<const Example> train,
                     uint64_t sampler_seed, ExperimentRecord& record) {
    const OptimizerConfig& optimizer = config_.optimizer;
    MinibatchSampler sampler(static_cast<int64_t>(train.size()),
                             optimizer.batch_size, optimizer.sampling,
                             RngStream(sampler_seed, RngPurpose::kSampling));
    StepOptions options;
    options.mask_sampling = optimizer.mask_sampling;
    if (optimizer.sampling == BatchSampling::kPoisson) {
      options.normalizer = sampler.expected_batch_size();
    }
    NoiseConfig noise = optimizer.noise;
    noise.sigma1 = noise_.sigma1;
    noise.sigma2 = noise_.sigma2;

    double noised = 0.0;
    double noised_embedding = 0.0;
    double loss = 0.0;
    int64_t steps = 0;
    std::vector<Example> batch;
    const auto start = Clock::now();
    for (int t = 0; t < optimizer.steps; ++t) {
      batch.clear();
      for (int64_t index : sampler.Next()) batch.push_back(train[index]);
      if (batch.empty()) continue;
      absl::StatusOr<StepReport> report;
      switch (optimizer.algorithm) {
        case Algorithm::kSgd:
          report = SgdStep(params, batch, optimizer.learning_rate, options);
          break;
        case Algorithm::kDpSgd:
          report = DpSgdStep(params, batch, noise.c2, noise.sigma2,
                             optimizer.learning_rate, noise_rng_, options);
          break;
        case Algorithm::kDpFest:
          report = DpFestStep(params, batch, selected_, noise.c2,
                              noise.sigma2, optimizer.learning_rate,
                              noise_rng_, options);
          break;
        case Algorithm::kAdaFest:
          report = AdaFestStep(params, batch, noise, optimizer.learning_rate,
                               noise_rng_, options);
          break;
        case Algorithm::kAdaFestPlus:
          report = AdaFestPlusStep(params, batch, selected_, noise,
                                   optimizer.learning_rate, noise_rng_,
                                   options);
          break;
      }
      if (!report.ok()) return report.status();
      noised += report->noised_coordinate_count;
      noised_embedding += report->noised_embedding_coordinates;
      loss += report->loss;
      ++steps;
    }
    record.wall_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - start)
            .count();
    const double denominator = std::max<int64_t>(steps, 1);
    record.mean_noised_coords = noised / denominator;
    record.mean_loss = loss / denominator;
    const double mean_embedding = noised_embedding / denominator;
    record.reduction_factor =
        record.mean_noised_coords > 0.0
            ? params.ParameterCount() / record.mean_noised_coords
            : std::numeric_limits<double>::infinity();
    record.embedding_reduction_factor =
        mean_embedding > 0.0 ? params.EmbeddingParameterCount() / mean_embedding
                             : std::numeric_limits<double>::infinity();
    return absl::OkStatus();
  }

 private:
  const ExperimentConfig& config_;
  CalibratedNoise noise_;
  RngStream noise_rng_;
  RngStream selection_rng_;
  SelectedVocabulary selected_;
};

ExperimentRecord BaseRecord(const ExperimentConfig& config,
                            const CalibratedNoise& noise) {
  const OptimizerConfig& optimizer = config.optimizer;
  ExperimentRecord record;
  record.algorithm = std::string(AlgorithmName(optimizer.algorithm));
  record.epsilon = config.budget.epsilon;
  record.delta = noise.delta;
  record.sigma1 = noise.sigma1;
  record.sigma2 = noise.sigma2;
  record.tau = optimizer.noise.tau;
  record.c1 = optimizer.noise.c1;
  record.c2 = optimizer.noise.c2;
  record.k = optimizer.dpfest_k;
  return record;
}

std::vector<std::vector<int64_t>> SumCounts(
    const std::vector<std::vector<int64_t>>& a,
    const std::vector<std::vector<int64_t>>& b) {
  std::vector<std::vector<int64_t>> out = a;
  for (size_t f = 0; f < out.size(); ++f) {
    for (size_t r = 0; r < out[f].size(); ++r) out[f][r] += b[f][r];
  }
  return out;
}

std::string FormatDouble(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return absl::StrFormat("%.10g", value);
}

}  // namespace

absl::Status ExperimentConfig::Validate() const {
  if (absl::Status status = optimizer.Validate(); !status.ok()) return status;
  if (!(budget.epsilon > 0.0)) {
    return absl::InvalidArgumentError("epsilon must be positive");
  }
  if (!(budget.delta < 1.0)) {
    return absl::InvalidArgumentError("delta must be below 1");
  }
  if (SelectionEpsilon(optimizer) >= budget.epsilon) {
    return absl::InvalidArgumentError(
        "selection epsilon must be below the total epsilon");
  }
  if (!(sigma_ratio > 0.0) || !std::isfinite(sigma_ratio)) {
    return absl::InvalidArgumentError("sigma ratio must be positive");
  }
  for (const std::optional<double>& sigma : {sigma1_override, sigma2_override}) {
    if (sigma.has_value() && !(*sigma >= 0.0)) {
      return absl::InvalidArgumentError("sigma overrides must be nonnegative");
    }
  }
  if (embedding_dim < 1) {
    return absl::InvalidArgumentError("embedding dim must be positive");
  }
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    return absl::InvalidArgumentError("eval fraction must be in (0, 1)");
  }
  return absl::OkStatus();
}

absl::StatusOr<CalibratedNoise> CalibrateNoise(const ExperimentConfig& config,
                                               double gamma, int64_t steps,
                                               int64_t num_train) {
  const Algorithm algorithm = config.optimizer.algorithm;
  CalibratedNoise out;
  out.delta = config.budget.delta > 0.0 ? config.budget.delta
                                        : 1.0 / static_cast<double>(num_train);
  out.training_epsilon = config.budget.epsilon - SelectionEpsilon(config.optimizer);
  const bool private_run = algorithm != Algorithm::kSgd &&
                           std::isfinite(config.budget.epsilon);
  const bool needs_sigma1 = IsAdaptive(algorithm) && !config.sigma1_override;
  const bool needs_sigma2 = algorithm != Algorithm::kSgd &&
                            !config.sigma2_override;
  if (private_run && (needs_sigma1 || needs_sigma2)) {
    absl::StatusOr<double> sigma = MemoizedSigma(
        out.training_epsilon, out.delta, std::min(gamma, 1.0), steps);
    if (!sigma.ok()) return sigma.status();
    if (IsAdaptive(algorithm)) {
      const SigmaPair pair = SplitSigma(*sigma, config.sigma_ratio);
      out.sigma1 = pair.sigma1;
      out.sigma2 = pair.sigma2;
    } else {
      out.sigma2 = *sigma;
    }
  }
  if (config.sigma1_override) out.sigma1 = *config.sigma1_override;
  if (config.sigma2_override) out.sigma2 = *config.sigma2_override;
  if (!IsAdaptive(algorithm)) out.sigma1 = 0.0;
  return out;
}

std::vector<std::vector<int64_t>> CountBuckets(
    std::span<const Example> examples, std::span<const int64_t> vocab_sizes) {
  return BucketFrequencies(examples, vocab_sizes);
}

RunningBucketCounts::RunningBucketCounts(std::vector<int64_t> vocab_sizes)
    : vocab_sizes_(std::move(vocab_sizes)) {
  for (int64_t size : vocab_sizes_) counts_.emplace_back(size, 0);
}

void RunningBucketCounts::AddPeriod(std::span<const Example> period) {
  counts_ = SumCounts(counts_, CountBuckets(period, vocab_sizes_));
  ++periods_seen_;
}

absl::StatusOr<ExperimentRecord> RunExperiment(const Dataset& data,
                                               const ExperimentConfig& config) {
  if (absl::Status status = config.Validate(); !status.ok()) return status;
  const int64_t n = static_cast<int64_t>(data.examples.size());
  const int64_t num_eval =
      static_cast<int64_t>(std::floor(n * config.eval_fraction));
  const int64_t num_train = n - num_eval;
  if (num_eval < 1 || num_train < 1) {
    return absl::InvalidArgumentError("too few examples to split");
  }
  const std::span<const Example> all(data.examples);
  const std::span<const Example> train = all.first(num_train);
  const std::span<const Example> eval = all.subspan(num_train);

  absl::StatusOr<ModelParams> params = BuildModel(data, config);
  if (!params.ok()) return params.status();
  const double gamma =
      static_cast<double>(config.optimizer.batch_size) / num_train;
  absl::StatusOr<CalibratedNoise> noise =
      CalibrateNoise(config, gamma, config.optimizer.steps, num_train);
  if (!noise.ok()) return noise.status();

  ExperimentRecord record = BaseRecord(config, *noise);
  Trainer trainer(config, *noise);
  if (absl::Status status =
          trainer.Select(CountBuckets(train, data.vocab_sizes));
      !status.ok()) {
    return status;
  }
  if (absl::Status status = trainer.Train(*params, train, config.seed, record);
      !status.ok()) {
    return status;
  }
  absl::StatusOr<Evaluation> evaluation = Evaluate(*params, eval);
  if (!evaluation.ok()) return evaluation.status();
  record.accuracy = evaluation->accuracy;
  record.auc = evaluation->auc;
  return record;
}

absl::Status StreamingConfig::Validate() const {
  if (periods < 2) return absl::InvalidArgumentError("need at least 2 periods");
  if (period_length < 1) {
    return absl::InvalidArgumentError("period length must be at least 1");
  }
  if (periods / period_length < 2) {
    return absl::InvalidArgumentError(
        "need at least two refresh chunks (periods / period_len >= 2)");
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<ExperimentRecord>> RunStreaming(
    const Dataset& data, const StreamingConfig& streaming,
    const ExperimentConfig& config) {
  if (absl::Status status = config.Validate(); !status.ok()) return status;
  if (absl::Status status = streaming.Validate(); !status.ok()) return status;
  if (static_cast<int64_t>(data.examples.size()) < streaming.periods) {
    return absl::InvalidArgumentError("fewer examples than periods");
  }
  const int chunks = streaming.periods / streaming.period_length;
  auto chunk = [&](int index) {
    const std::span<const Example> first =
        data.Period(index * streaming.period_length, streaming.periods);
    const std::span<const Example> last = data.Period(
        (index + 1) * streaming.period_length - 1, streaming.periods);
    return std::span<const Example>(first.data(), last.data() + last.size());
  };

  const std::vector<std::vector<int64_t>> first_counts =
      CountBuckets(data.Period(0, streaming.periods), data.vocab_sizes);
  const std::vector<std::vector<int64_t>> all_counts =
      CountBuckets(data.examples, data.vocab_sizes);
  RunningBucketCounts running(data.vocab_sizes);

  absl::StatusOr<ModelParams> params = BuildModel(data, config);
  if (!params.ok()) return params.status();

  std::vector<ExperimentRecord> records;
  std::optional<Trainer> trainer;
  for (int r = 0; r + 1 < chunks; ++r) {
    const std::span<const Example> train = chunk(r);
    const std::span<const Example> eval = chunk(r + 1);
    for (int p = r * streaming.period_length;
         p < (r + 1) * streaming.period_length; ++p) {
      running.AddPeriod(data.Period(p, streaming.periods));
    }
    const int64_t num_train = static_cast<int64_t>(train.size());
    const double gamma =
        static_cast<double>(config.optimizer.batch_size) / num_train;
    absl::StatusOr<CalibratedNoise> noise =
        CalibrateNoise(config, gamma, config.optimizer.steps, num_train);
    if (!noise.ok()) return noise.status();
    if (!trainer.has_value()) trainer.emplace(config, *noise);
    trainer->set_noise(*noise);

    std::vector<std::vector<int64_t>> counts;
    switch (config.optimizer.frequency_source) {
      case FrequencySource::kFirstPeriod:
        counts = first_counts;
        break;
      case FrequencySource::kPublicPrior:
      case FrequencySource::kAllPeriods:
        counts = all_counts;
        break;
      case FrequencySource::kStreaming:
        counts = running.counts();
        break;
      case FrequencySource::kDpTopK:
        counts = CountBuckets(train, data.vocab_sizes);
        break;
    }
    if (absl::Status status = trainer->Select(counts); !status.ok()) {
      return status;
    }
    ExperimentRecord record = BaseRecord(config, *noise);
    record.period = r;
    if (absl::Status status = trainer->Train(
            *params, train, MixSeed(config.seed + static_cast<uint64_t>(r)),
            record);
        !status.ok()) {
      return status;
    }
    absl::StatusOr<Evaluation> evaluation = Evaluate(*params, eval);
    if (!evaluation.ok()) return evaluation.status();
    record.accuracy = evaluation->accuracy;
    record.auc = evaluation->auc;
    records.push_back(std::move(record));
  }
  return records;
}

double MeanAccuracy(std::span<const ExperimentRecord> records) {
  if (records.empty()) return 0.0;
  double total = 0.0;
  for (const ExperimentRecord& record : records) total += record.accuracy;
  return total / records.size();
}

absl::StatusOr<std::vector<ExperimentConfig>> ExpandGrid(
    const KeyValueConfig& grid, const ExperimentConfig& base) {
  static const char* const kKeys[] = {
      "algo", "epsilon", "delta", "sigma_ratio", "tau", "c1", "c2",
      "k", "lr", "batch", "steps", "freq_source", "dpfest_epsilon", "seed"};
  for (const auto& [key, values] : grid.entries()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) {
          return key == k;
        }) == std::end(kKeys)) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown grid key '", key, "'"));
    }
    if (values.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("grid key '", key, "' has no values"));
    }
  }
  std::vector<ExperimentConfig> cells = {base};
  for (const char* key : kKeys) {
    if (!grid.Has(key)) continue;
    const std::vector<std::string> values = grid.Values(key);
    std::vector<ExperimentConfig> expanded;
    for (const ExperimentConfig& cell : cells) {
      for (const std::string& text : values) {
        ExperimentConfig next = cell;
        const std::string_view name = key;
        absl::Status status;
        if (name == "algo") {
          absl::StatusOr<Algorithm> algorithm = ParseAlgorithm(text);
          status = algorithm.status();
          if (algorithm.ok()) next.optimizer.algorithm = *algorithm;
        } else if (name == "freq_source") {
          absl::StatusOr<FrequencySource> source = ParseFrequencySource(text);
          status = source.status();
          if (source.ok()) next.optimizer.frequency_source = *source;
        } else if (name == "k" || name == "batch" || name == "steps" ||
                   name == "seed") {
          absl::StatusOr<int64_t> value = ParseInt(text);
          status = value.status();
          if (value.ok()) {
            if (name == "k") next.optimizer.dpfest_k = *value;
            if (name == "batch") {
              next.optimizer.batch_size = static_cast<int>(*value);
            }
            if (name == "steps") next.optimizer.steps = static_cast<int>(*value);
            if (name == "seed") next.seed = static_cast<uint64_t>(*value);
          }
        } else {
          absl::StatusOr<double> value = ParseDouble(text);
          status = value.status();
          if (value.ok()) {
            if (name == "epsilon") next.budget.epsilon = *value;
            if (name == "delta") next.budget.delta = *value;
            if (name == "sigma_ratio") next.sigma_ratio = *value;
            if (name == "tau") next.optimizer.noise.tau = *value;
            if (name == "c1") next.optimizer.noise.c1 = *value;
            if (name == "c2") next.optimizer.noise.c2 = *value;
            if (name == "lr") next.optimizer.learning_rate = *value;
            if (name == "dpfest_epsilon") next.optimizer.dpfest_epsilon = *value;
          }
        }
        if (!status.ok()) {
          return absl::InvalidArgumentError(
              absl::StrCat(key, ": ", status.message()));
        }
        expanded.push_back(std::move(next));
      }
    }
    cells = std::move(expanded);
  }
  return cells;
}

std::vector<double> DefaultSigmaRatios() { return {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}; }

std::vector<double> DefaultThresholds() {
  return {0.5, 1.0, 5.0, 10.0, 20.0, 50.0, 100.0};
}

std::vector<double> DefaultContributionClips() { return {1.0, 5.0, 10.0}; }

absl::StatusOr<std::vector<ExperimentRecord>> RunSweep(
    const Dataset& data, std::span<const ExperimentConfig> cells) {
  if (cells.empty()) return absl::InvalidArgumentError("empty grid");
  std::vector<ExperimentRecord> records;
  for (const ExperimentConfig& cell : cells) {
    absl::StatusOr<ExperimentRecord> record = RunExperiment(data, cell);
    if (!record.ok()) return record.status();
    records.push_back(*std::move(record));
  }
  return records;
}

std::vector<FrontierPoint> UtilityReductionFrontier(
    std::span<const ExperimentRecord> records, double baseline_accuracy,
    std::span<const double> utility_losses, bool embedding_only) {
  std::vector<FrontierPoint> frontier;
  for (double loss : utility_losses) {
    FrontierPoint point{.utility_loss = loss};
    for (const ExperimentRecord& record : records) {
      if (record.accuracy >= baseline_accuracy - loss) {
        point.best_reduction = std::max(
            point.best_reduction, embedding_only
                                      ? record.embedding_reduction_factor
                                      : record.reduction_factor);
      }
    }
    frontier.push_back(point);
  }
  return frontier;
}

void WriteRecordsCsv(std::span<const ExperimentRecord> records,
                     std::ostream& out) {
  out << kRecordCsvHeader << "\n";
  for (const ExperimentRecord& r : records) {
    out << r.algorithm << "," << FormatDouble(r.epsilon) << ","
        << FormatDouble(r.delta) << "," << FormatDouble(r.sigma1) << ","
        << FormatDouble(r.sigma2) << "," << FormatDouble(r.tau) << ","
        << FormatDouble(r.c1) << "," << FormatDouble(r.c2) << "," << r.k
        << "," << FormatDouble(r.accuracy) << "," << FormatDouble(r.auc) << ","
        << FormatDouble(r.mean_noised_coords) << ","
        << FormatDouble(r.reduction_factor) << ","
        << absl::StrFormat("%.3f", r.wall_ms) << "\n";
  }
}

absl::Status WriteRecordsFile(std::span<const ExperimentRecord> records,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  WriteRecordsCsv(records, out);
  if (!out) return absl::DataLossError(absl::StrCat("write failed: ", path));
  return absl::OkStatus();
}

}  // namespace sparse_dp
