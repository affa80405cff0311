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

#ifndef SPARSE_DP_KEY_VALUE_CONFIG_H_
#define SPARSE_DP_KEY_VALUE_CONFIG_H_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"

namespace sparse_dp {

// `key=value` lines with comma-separated value lists. Blank lines and lines
// starting with '#' are ignored; later keys overwrite earlier ones.
class KeyValueConfig {
 public:
  static absl::StatusOr<KeyValueConfig> Parse(std::string_view text);
  static absl::StatusOr<KeyValueConfig> ReadFile(const std::string& path);

  bool Has(std::string_view key) const;
  const std::map<std::string, std::vector<std::string>, std::less<>>& entries()
      const {
    return entries_;
  }
  // Raw values of `key`; empty if absent.
  std::vector<std::string> Values(std::string_view key) const;

  absl::StatusOr<std::vector<double>> Doubles(std::string_view key) const;
  absl::StatusOr<std::vector<int64_t>> Ints(std::string_view key) const;
  // Single-valued accessors returning `fallback` when the key is absent.
  absl::StatusOr<double> Double(std::string_view key, double fallback) const;
  absl::StatusOr<int64_t> Int(std::string_view key, int64_t fallback) const;
  std::string String(std::string_view key, std::string fallback) const;

  void Set(std::string key, std::vector<std::string> values);

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

// Parses a double, accepting "inf"/"infinity" and scientific notation.
absl::StatusOr<double> ParseDouble(std::string_view text);
// Parses an integer, also accepting integral scientific notation ("1e5").
absl::StatusOr<int64_t> ParseInt(std::string_view text);

}  // namespace sparse_dp

#endif  // SPARSE_DP_KEY_VALUE_CONFIG_H_
