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

#include "sparse_dp/rng.h"

#include <cstdint>
#include <limits>

namespace sparse_dp {

uint64_t MixSeed(uint64_t value) {
  value += 0x9e3779b97f4a7c15ULL;
  value = (value ^ (value >> 30)) * 0xbf58476d1ce4e5b9ULL;
  value = (value ^ (value >> 27)) * 0x94d049bb133111ebULL;
  return value ^ (value >> 31);
}

RngStream::RngStream(uint64_t seed, RngPurpose purpose)
    : seed_(seed),
      purpose_(purpose),
      engine_(MixSeed(seed ^ MixSeed(static_cast<uint64_t>(purpose)))) {}

double RngStream::Normal() { return normal_(engine_); }

double RngStream::Uniform() {
  // 53 random bits, shifted off zero.
  const uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

int64_t RngStream::UniformInt(int64_t lo, int64_t hi) {
  std::uniform_int_distribution<int64_t> dist(lo, hi);
  return dist(engine_);
}

RngStream RngStream::Fork(uint64_t site) {
  ++counter_;
  const uint64_t child_seed =
      MixSeed(MixSeed(seed_ ^ engine_()) ^ MixSeed(site + counter_));
  return RngStream(child_seed, purpose_);
}

}  // namespace sparse_dp
