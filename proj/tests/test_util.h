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

#ifndef SPARSE_DP_TESTS_TEST_UTIL_H_
#define SPARSE_DP_TESTS_TEST_UTIL_H_

#include <cstdint>
#include <vector>

#include "sparse_dp/model.h"
#include "sparse_dp/rng.h"

namespace sparse_dp::testing {

// Model with the given vocab sizes, embedding dim, numeric inputs, and hidden
// widths, randomly initialized from `seed`.
ModelParams RandomModel(const std::vector<int64_t>& vocab_sizes, int dim,
                        int num_numeric, const std::vector<int>& hidden,
                        uint64_t seed, Pooling pooling = Pooling::kSum);

// Example activating between 1 and `max_buckets` distinct buckets per
// feature.
Example RandomExample(const ModelParams& params, int max_buckets,
                      RngStream& rng);

std::vector<Example> RandomBatch(const ModelParams& params, int size,
                                 int max_buckets, RngStream& rng);

// Exact equality of every parameter.
bool SameParams(const ModelParams& a, const ModelParams& b);

}  // namespace sparse_dp::testing

#endif  // SPARSE_DP_TESTS_TEST_UTIL_H_
