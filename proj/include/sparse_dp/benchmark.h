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

#ifndef SPARSE_DP_BENCHMARK_H_
#define SPARSE_DP_BENCHMARK_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace sparse_dp {

struct UpdateBenchmarkRow {
  int64_t vocab_size = 0;
  // Median milliseconds per update over the trials.
  double dense_ms = 0.0;
  double sparse_ms = 0.0;
  double factor = 0.0;
};

// Times one noisy embedding-table update per trial, two ways:
//   dense:  noise every coordinate of the c x d table, then apply the batch
//           gradient rows;
//   sparse: noise only the rows touched by the batch and scatter them.
// Tables hold floats.
absl::StatusOr<std::vector<UpdateBenchmarkRow>> BenchmarkUpdates(
    std::span<const int64_t> vocab_sizes, int dim, int batch_size, int trials,
    uint64_t seed = 1);

void WriteBenchmarkCsv(std::span<const UpdateBenchmarkRow> rows,
                       std::ostream& out);

}  // namespace sparse_dp

#endif  // SPARSE_DP_BENCHMARK_H_
