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

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"

namespace sparse_dp {
namespace {

TEST(BenchmarkTest, ProducesOneRowPerVocabulary) {
  const std::vector<int64_t> vocab = {1000, 20000};
  absl::StatusOr<std::vector<UpdateBenchmarkRow>> rows =
      BenchmarkUpdates(vocab, 8, 32, 3);
  ASSERT_TRUE(rows.ok()) << rows.status();
  ASSERT_EQ(rows->size(), 2u);
  for (size_t i = 0; i < 2; ++i) {
    EXPECT_EQ((*rows)[i].vocab_size, vocab[i]);
    EXPECT_GT((*rows)[i].dense_ms, 0.0);
    EXPECT_GT((*rows)[i].sparse_ms, 0.0);
    EXPECT_DOUBLE_EQ((*rows)[i].factor,
                     (*rows)[i].dense_ms / (*rows)[i].sparse_ms);
  }
}

TEST(BenchmarkTest, RejectsBadArguments) {
  const std::vector<int64_t> vocab = {100};
  EXPECT_FALSE(BenchmarkUpdates(vocab, 0, 8, 1).ok());
  EXPECT_FALSE(BenchmarkUpdates(vocab, 4, 0, 1).ok());
  EXPECT_FALSE(BenchmarkUpdates(vocab, 4, 8, 0).ok());
  const std::vector<int64_t> empty_vocab = {0};
  EXPECT_FALSE(BenchmarkUpdates(empty_vocab, 4, 8, 1).ok());
}

TEST(BenchmarkTest, CsvLayout) {
  std::ostringstream out;
  WriteBenchmarkCsv(std::vector<UpdateBenchmarkRow>{{100, 2.0, 0.5, 4.0}},
                    out);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "vocab_size,dense_ms,sparse_ms,reduction_factor");
  EXPECT_EQ(row.substr(0, 4), "100,");
}

}  // namespace
}  // namespace sparse_dp
