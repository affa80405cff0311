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

// Command-line driver: dataset generation, training, calibration, sweeps,
// streaming runs, and update benchmarks.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "sparse_dp/accountant.h"
#include "sparse_dp/benchmark.h"
#include "sparse_dp/dataset.h"
#include "sparse_dp/experiment.h"
#include "sparse_dp/key_value_config.h"
#include "sparse_dp/optimizers.h"

namespace sparse_dp {
namespace {

struct TrainFlags {
  std::string data;
  std::string algo = "dpsgd";
  double epsilon = 1.0;
  double delta = 0.0;
  double sigma_ratio = 1.0;
  double tau = 0.0;
  double c1 = 1.0;
  double c2 = 1.0;
  int64_t k = 0;
  std::string freq_source = "public";
  int batch = 1024;
  int steps = 500;
  double lr = 1.0;
  uint64_t seed = 1;
  std::string out;
  std::optional<double> sigma1;
  std::optional<double> sigma2;
  int dim = 8;
  double eval_fraction = 0.2;
  double dpfest_epsilon = 0.01;
  bool poisson = false;
};

void AddTrainFlags(CLI::App* app, TrainFlags& flags) {
  app->add_option("--data", flags.data, "Dataset CSV")->required();
  app->add_option("--algo", flags.algo,
                  "sgd|dpsgd|dpfest|adafest|adafest_plus");
  app->add_option("--epsilon", flags.epsilon, "Total privacy budget; inf disables noise");
  app->add_option("--delta", flags.delta, "Delta; <= 0 means 1/N_train");
  app->add_option("--sigma-ratio", flags.sigma_ratio, "sigma1 / sigma2");
  app->add_option("--tau", flags.tau, "Contribution-map threshold");
  app->add_option("--c1", flags.c1, "Contribution clip norm");
  app->add_option("--c2", flags.c2, "Gradient clip norm");
  app->add_option("--k", flags.k, "Buckets kept by frequency selection");
  app->add_option("--freq-source", flags.freq_source,
                  "public|dp_topk|first|all|streaming");
  app->add_option("--batch", flags.batch, "Batch size");
  app->add_option("--steps", flags.steps, "Training steps");
  app->add_option("--lr", flags.lr, "Learning rate");
  app->add_option("--seed", flags.seed, "Seed");
  app->add_option("--out", flags.out, "Results CSV (default stdout)");
  app->add_option("--sigma1", flags.sigma1, "Override sigma1");
  app->add_option("--sigma2", flags.sigma2, "Override sigma2");
  app->add_option("--dim", flags.dim, "Embedding dimension");
  app->add_option("--eval-fraction", flags.eval_fraction,
                  "Held-out tail fraction");
  app->add_option("--dpfest-epsilon", flags.dpfest_epsilon,
                  "Budget for DP top-k selection");
  app->add_flag("--poisson", flags.poisson, "Poisson batch sampling");
}

absl::StatusOr<ExperimentConfig> ToConfig(const TrainFlags& flags) {
  ExperimentConfig config;
  absl::StatusOr<Algorithm> algorithm = ParseAlgorithm(flags.algo);
  if (!algorithm.ok()) return algorithm.status();
  absl::StatusOr<FrequencySource> source =
      ParseFrequencySource(flags.freq_source);
  if (!source.ok()) return source.status();
  config.optimizer.algorithm = *algorithm;
  config.optimizer.frequency_source = *source;
  config.optimizer.learning_rate = flags.lr;
  config.optimizer.batch_size = flags.batch;
  config.optimizer.steps = flags.steps;
  config.optimizer.dpfest_k = flags.k;
  config.optimizer.dpfest_epsilon = flags.dpfest_epsilon;
  config.optimizer.noise.c1 = flags.c1;
  config.optimizer.noise.c2 = flags.c2;
  config.optimizer.noise.tau = flags.tau;
  config.optimizer.sampling =
      flags.poisson ? BatchSampling::kPoisson : BatchSampling::kShuffled;
  config.budget.epsilon = flags.epsilon;
  config.budget.delta = flags.delta;
  config.sigma_ratio = flags.sigma_ratio;
  config.sigma1_override = flags.sigma1;
  config.sigma2_override = flags.sigma2;
  config.embedding_dim = flags.dim;
  config.eval_fraction = flags.eval_fraction;
  config.seed = flags.seed;
  if (absl::Status status = config.Validate(); !status.ok()) return status;
  return config;
}

absl::Status EmitRecords(const std::vector<ExperimentRecord>& records,
                         const std::string& out) {
  if (out.empty()) {
    WriteRecordsCsv(records, std::cout);
    return absl::OkStatus();
  }
  return WriteRecordsFile(records, out);
}

absl::Status RunGenerate(const std::string& spec_path, const std::string& out,
                         std::optional<uint64_t> seed) {
  absl::StatusOr<KeyValueConfig> config = KeyValueConfig::ReadFile(spec_path);
  if (!config.ok()) return config.status();
  absl::StatusOr<DatasetSpec> spec = ParseDatasetSpec(*config);
  if (!spec.ok()) return spec.status();
  if (seed) spec->seed = *seed;
  absl::StatusOr<GeneratedDataset> generated = GenerateDataset(*spec);
  if (!generated.ok()) return generated.status();
  return WriteDatasetFile(generated->data, out);
}

absl::Status RunTrain(const TrainFlags& flags) {
  absl::StatusOr<ExperimentConfig> config = ToConfig(flags);
  if (!config.ok()) return config.status();
  absl::StatusOr<Dataset> data = ReadDatasetFile(flags.data);
  if (!data.ok()) return data.status();
  absl::StatusOr<ExperimentRecord> record = RunExperiment(*data, *config);
  if (!record.ok()) return record.status();
  return EmitRecords({*record}, flags.out);
}

absl::Status RunCalibrate(double epsilon, double delta, double gamma,
                          int64_t steps, double ratio) {
  if (!(ratio > 0.0)) {
    return absl::InvalidArgumentError("sigma ratio must be positive");
  }
  absl::StatusOr<double> sigma = CalibrateSigma(epsilon, delta, gamma, steps);
  if (!sigma.ok()) return sigma.status();
  const SigmaPair pair = SplitSigma(*sigma, ratio);
  std::cout << absl::StrFormat("%g,%g,%g,%d,%.6f,%.6f,%.6f\n", epsilon, delta,
                               gamma, steps, pair.sigma1, pair.sigma2, *sigma);
  return absl::OkStatus();
}

absl::Status RunSweepCommand(const std::string& data_path,
                             const std::string& grid_path,
                             const std::string& out) {
  absl::StatusOr<KeyValueConfig> grid = KeyValueConfig::ReadFile(grid_path);
  if (!grid.ok()) return grid.status();
  absl::StatusOr<std::vector<ExperimentConfig>> cells =
      ExpandGrid(*grid, ExperimentConfig{});
  if (!cells.ok()) return cells.status();
  for (const ExperimentConfig& cell : *cells) {
    if (absl::Status status = cell.Validate(); !status.ok()) return status;
  }
  absl::StatusOr<Dataset> data = ReadDatasetFile(data_path);
  if (!data.ok()) return data.status();
  absl::StatusOr<std::vector<ExperimentRecord>> records =
      RunSweep(*data, *cells);
  if (!records.ok()) return records.status();
  if (absl::Status status = EmitRecords(*records, out); !status.ok()) {
    return status;
  }
  double baseline = 0.0;
  bool has_dpsgd = false;
  for (const ExperimentRecord& record : *records) {
    if (record.algorithm == "dpsgd") {
      baseline = has_dpsgd ? std::max(baseline, record.accuracy)
                           : record.accuracy;
      has_dpsgd = true;
    }
  }
  if (!has_dpsgd) {
    for (const ExperimentRecord& record : *records) {
      baseline = std::max(baseline, record.accuracy);
    }
  }
  const std::vector<double> losses = {0.001, 0.002, 0.005, 0.01, 0.02, 0.05};
  std::ostream& log = out.empty() ? std::cerr : std::cout;
  log << "# frontier vs baseline accuracy "
      << absl::StrFormat("%.4f", baseline) << "\n"
      << "utility_loss,best_reduction_factor\n";
  for (const FrontierPoint& point :
       UtilityReductionFrontier(*records, baseline, losses)) {
    log << absl::StrFormat("%g,%g\n", point.utility_loss,
                           point.best_reduction);
  }
  return absl::OkStatus();
}

absl::Status RunStream(const TrainFlags& flags, int periods, int period_len) {
  absl::StatusOr<ExperimentConfig> config = ToConfig(flags);
  if (!config.ok()) return config.status();
  absl::StatusOr<Dataset> data = ReadDatasetFile(flags.data);
  if (!data.ok()) return data.status();
  absl::StatusOr<std::vector<ExperimentRecord>> records = RunStreaming(
      *data, StreamingConfig{.periods = periods, .period_length = period_len},
      *config);
  if (!records.ok()) return records.status();
  return EmitRecords(*records, flags.out);
}

absl::Status RunBenchmark(const std::string& vocab, int dim, int batch,
                          int trials, const std::string& out) {
  std::vector<int64_t> sizes;
  for (absl::string_view token : absl::StrSplit(vocab, ',')) {
    absl::StatusOr<int64_t> size =
        ParseInt(std::string_view(token.data(), token.size()));
    if (!size.ok()) return size.status();
    sizes.push_back(*size);
  }
  absl::StatusOr<std::vector<UpdateBenchmarkRow>> rows =
      BenchmarkUpdates(sizes, dim, batch, trials);
  if (!rows.ok()) return rows.status();
  if (out.empty()) {
    WriteBenchmarkCsv(*rows, std::cout);
    return absl::OkStatus();
  }
  std::ofstream file(out);
  if (!file) return absl::NotFoundError("cannot open " + out);
  WriteBenchmarkCsv(*rows, file);
  return absl::OkStatus();
}

int Main(int argc, char** argv) {
  CLI::App app{"Sparsity-preserving differentially private training"};
  app.require_subcommand(1);

  std::string spec_path, out;
  std::optional<uint64_t> seed;
  CLI::App* generate = app.add_subcommand("generate", "Write a synthetic dataset");
  generate->add_option("--spec", spec_path, "key=value spec file")->required();
  generate->add_option("--out", out, "Output CSV")->required();
  generate->add_option("--seed", seed, "Overrides the spec seed");

  TrainFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "Train and evaluate once");
  AddTrainFlags(train, train_flags);

  double epsilon = 1.0, delta = 1e-5, gamma = 0.01, ratio = 1.0;
  int64_t steps = 1000;
  CLI::App* calibrate =
      app.add_subcommand("calibrate", "Noise multiplier for a budget");
  calibrate->add_option("--epsilon", epsilon)->required();
  calibrate->add_option("--delta", delta)->required();
  calibrate->add_option("--gamma", gamma)->required();
  calibrate->add_option("--steps", steps)->required();
  calibrate->add_option("--sigma-ratio", ratio);

  std::string data_path, grid_path;
  CLI::App* sweep = app.add_subcommand("sweep", "Grid sweep");
  sweep->add_option("--data", data_path)->required();
  sweep->add_option("--grid", grid_path)->required();
  sweep->add_option("--out", out);

  TrainFlags stream_flags;
  int periods = 2, period_len = 1;
  CLI::App* stream = app.add_subcommand("stream", "Streaming refresh runs");
  AddTrainFlags(stream, stream_flags);
  stream->add_option("--periods", periods, "Number of periods")->required();
  stream->add_option("--period-len", period_len, "Periods per refresh");

  std::string vocab = "1e5,2e5,1e6";
  int dim = 64, batch = 1024, trials = 100;
  CLI::App* benchmark =
      app.add_subcommand("benchmark", "Dense vs sparse update timing");
  benchmark->add_option("--vocab", vocab, "Comma-separated vocab sizes");
  benchmark->add_option("--dim", dim);
  benchmark->add_option("--batch", batch);
  benchmark->add_option("--trials", trials);
  benchmark->add_option("--out", out);

  CLI11_PARSE(app, argc, argv);

  absl::Status status;
  if (generate->parsed()) {
    status = RunGenerate(spec_path, out, seed);
  } else if (train->parsed()) {
    status = RunTrain(train_flags);
  } else if (calibrate->parsed()) {
    status = RunCalibrate(epsilon, delta, gamma, steps, ratio);
  } else if (sweep->parsed()) {
    status = RunSweepCommand(data_path, grid_path, out);
  } else if (stream->parsed()) {
    status = RunStream(stream_flags, periods, period_len);
  } else if (benchmark->parsed()) {
    status = RunBenchmark(vocab, dim, batch, trials, out);
  }
  if (!status.ok()) {
    std::cerr << "error: " << status << "\n";
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace sparse_dp

int main(int argc, char** argv) { return sparse_dp::Main(argc, argv); }
