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

#include "sparse_dp/benchmark.h"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_format.h"
#include "sparse_dp/rng.h"

namespace sparse_dp {
namespace {

using Clock = std::chrono::steady_clock;

constexpr float kLearningRate = 0.1f;
constexpr float kNoiseScale = 1e-3f;

double Median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid]
                                : 0.5 * (values[mid - 1] + values[mid]);
}

double ElapsedMs(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

}  // namespace

absl::StatusOr<std::vector<UpdateBenchmarkRow>> BenchmarkUpdates(
    std::span<const int64_t> vocab_sizes, int dim, int batch_size, int trials,
    uint64_t seed) {
  if (dim < 1 || batch_size < 1 || trials < 1) {
    return absl::InvalidArgumentError(
        "dim, batch size, and trials must be positive");
  }
  RngStream rng(seed, RngPurpose::kMechanismNoise);
  std::normal_distribution<float> normal(0.0f, kNoiseScale);
  std::vector<UpdateBenchmarkRow> rows;
  for (int64_t vocab : vocab_sizes) {
    if (vocab < 1) return absl::InvalidArgumentError("vocab sizes must be >= 1");
    const size_t d = static_cast<size_t>(dim);
    std::vector<float> table(static_cast<size_t>(vocab) * d, 0.0f);
    // Batch gradient: one row per example, possibly repeated.
    std::vector<int64_t> batch_rows(batch_size);
    std::vector<float> gradient(static_cast<size_t>(batch_size) * d);
    std::vector<float> row_noise(d);
    std::vector<double> dense_times;
    std::vector<double> sparse_times;
    for (int trial = 0; trial < trials; ++trial) {
      for (int64_t& row : batch_rows) row = rng.UniformInt(0, vocab - 1);
      for (float& g : gradient) g = normal(rng.engine());

      Clock::time_point start = Clock::now();
      for (float& value : table) value -= kLearningRate * normal(rng.engine());
      for (int b = 0; b < batch_size; ++b) {
        float* row = table.data() + batch_rows[b] * d;
        const float* g = gradient.data() + b * d;
        for (size_t j = 0; j < d; ++j) row[j] -= kLearningRate * g[j];
      }
      dense_times.push_back(ElapsedMs(start));

      start = Clock::now();
      for (int b = 0; b < batch_size; ++b) {
        for (float& z : row_noise) z = normal(rng.engine());
        float* row = table.data() + batch_rows[b] * d;
        const float* g = gradient.data() + b * d;
        for (size_t j = 0; j < d; ++j) {
          row[j] -= kLearningRate * (g[j] + row_noise[j]);
        }
      }
      sparse_times.push_back(ElapsedMs(start));
    }
    UpdateBenchmarkRow row{.vocab_size = vocab,
                           .dense_ms = Median(dense_times),
                           .sparse_ms = Median(sparse_times)};
    row.factor = row.sparse_ms > 0.0 ? row.dense_ms / row.sparse_ms : 0.0;
    rows.push_back(row);
  }
  return rows;
}

void WriteBenchmarkCsv(std::span<const UpdateBenchmarkRow> rows,
                       std::ostream& out) {
  out << "vocab_size,dense_ms,sparse_ms,reduction_factor\n";
  for (const UpdateBenchmarkRow& row : rows) {
    out << row.vocab_size << ","
        << absl::StrFormat("%.6f,%.6f,%.4f", row.dense_ms, row.sparse_ms,
                           row.factor)
        << "\n";
  }
}

}  // namespace sparse_dp
