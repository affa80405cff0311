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

#include "sparse_dp/key_value_config.h"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"

namespace sparse_dp {

namespace {

absl::string_view ToAbsl(std::string_view text) {
  return absl::string_view(text.data(), text.size());
}

}  // namespace

absl::StatusOr<double> ParseDouble(std::string_view text) {
  const std::string lowered =
      absl::AsciiStrToLower(absl::StripAsciiWhitespace(ToAbsl(text)));
  if (lowered == "inf" || lowered == "infinity" || lowered == "+inf") {
    return std::numeric_limits<double>::infinity();
  }
  double value = 0.0;
  if (!absl::SimpleAtod(lowered, &value) || std::isnan(value)) {
    return absl::InvalidArgumentError(absl::StrCat("not a number: '", ToAbsl(text), "'"));
  }
  return value;
}

absl::StatusOr<int64_t> ParseInt(std::string_view text) {
  const absl::string_view stripped = absl::StripAsciiWhitespace(ToAbsl(text));
  int64_t value = 0;
  if (absl::SimpleAtoi(stripped, &value)) return value;
  double real = 0.0;
  if (absl::SimpleAtod(stripped, &real) && std::isfinite(real) &&
      real == std::floor(real) && std::abs(real) < 9.0e18) {
    return static_cast<int64_t>(real);
  }
  return absl::InvalidArgumentError(
      absl::StrCat("not an integer: '", ToAbsl(text), "'"));
}

absl::StatusOr<KeyValueConfig> KeyValueConfig::Parse(std::string_view text) {
  KeyValueConfig config;
  int line_number = 0;
  for (absl::string_view line : absl::StrSplit(ToAbsl(text), '\n')) {
    ++line_number;
    line = absl::StripAsciiWhitespace(line);
    if (line.empty() || line.front() == '#') continue;
    const size_t eq = line.find('=');
    if (eq == absl::string_view::npos) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_number, ": expected key=value"));
    }
    const std::string key(absl::StripAsciiWhitespace(line.substr(0, eq)));
    if (key.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_number, ": empty key"));
    }
    std::vector<std::string> values;
    for (absl::string_view value : absl::StrSplit(line.substr(eq + 1), ',')) {
      value = absl::StripAsciiWhitespace(value);
      if (!value.empty()) values.emplace_back(value);
    }
    config.entries_[key] = std::move(values);
  }
  return config;
}

absl::StatusOr<KeyValueConfig> KeyValueConfig::ReadFile(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return Parse(buffer.str());
}

bool KeyValueConfig::Has(std::string_view key) const {
  return entries_.find(key) != entries_.end();
}

std::vector<std::string> KeyValueConfig::Values(std::string_view key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return {};
  return it->second;
}

absl::StatusOr<std::vector<double>> KeyValueConfig::Doubles(
    std::string_view key) const {
  std::vector<double> out;
  for (const std::string& value : Values(key)) {
    absl::StatusOr<double> parsed = ParseDouble(value);
    if (!parsed.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat(ToAbsl(key), ": ", parsed.status().message()));
    }
    out.push_back(*parsed);
  }
  return out;
}

absl::StatusOr<std::vector<int64_t>> KeyValueConfig::Ints(
    std::string_view key) const {
  std::vector<int64_t> out;
  for (const std::string& value : Values(key)) {
    absl::StatusOr<int64_t> parsed = ParseInt(value);
    if (!parsed.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat(ToAbsl(key), ": ", parsed.status().message()));
    }
    out.push_back(*parsed);
  }
  return out;
}

absl::StatusOr<double> KeyValueConfig::Double(std::string_view key,
                                              double fallback) const {
  if (!Has(key)) return fallback;
  absl::StatusOr<std::vector<double>> values = Doubles(key);
  if (!values.ok()) return values.status();
  if (values->size() != 1) {
    return absl::InvalidArgumentError(absl::StrCat(ToAbsl(key), ": expected one value"));
  }
  return values->front();
}

absl::StatusOr<int64_t> KeyValueConfig::Int(std::string_view key,
                                            int64_t fallback) const {
  if (!Has(key)) return fallback;
  absl::StatusOr<std::vector<int64_t>> values = Ints(key);
  if (!values.ok()) return values.status();
  if (values->size() != 1) {
    return absl::InvalidArgumentError(absl::StrCat(ToAbsl(key), ": expected one value"));
  }
  return values->front();
}

std::string KeyValueConfig::String(std::string_view key,
                                   std::string fallback) const {
  std::vector<std::string> values = Values(key);
  if (values.empty()) return fallback;
  return values.front();
}

void KeyValueConfig::Set(std::string key, std::vector<std::string> values) {
  entries_[std::move(key)] = std::move(values);
}

}  // namespace sparse_dp
