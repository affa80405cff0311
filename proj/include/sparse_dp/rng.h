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

#ifndef SPARSE_DP_RNG_H_
#define SPARSE_DP_RNG_H_

#include <cstdint>
#include <random>

namespace sparse_dp {

// What a stream is used for. The tag is mixed into the seed, so streams with
// different purposes never produce the same sequence.
enum class RngPurpose : uint64_t {
  kInit = 1,
  kSampling = 2,
  kMechanismNoise = 3,
  kGumbel = 4,
};

// A seeded random stream bound to one purpose. Streams are cheap to copy;
// copies replay the same sequence.
class RngStream {
 public:
  RngStream(uint64_t seed, RngPurpose purpose);

  RngPurpose purpose() const { return purpose_; }
  uint64_t seed() const { return seed_; }
  // Number of child streams handed out by Fork().
  uint64_t counter() const { return counter_; }

  // Standard normal draw.
  double Normal();
  // Uniform draw on the open interval (0, 1).
  double Uniform();
  // Uniform integer on [lo, hi].
  int64_t UniformInt(int64_t lo, int64_t hi);
  uint64_t NextU64() { return engine_(); }

  // Derives an independent child stream for one call site. Successive forks
  // of the same stream yield different children.
  RngStream Fork(uint64_t site);

  std::mt19937_64& engine() { return engine_; }

 private:
  uint64_t seed_;
  RngPurpose purpose_;
  uint64_t counter_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

// SplitMix64 finalizer, used for seed derivation.
uint64_t MixSeed(uint64_t value);

}  // namespace sparse_dp

#endif  // SPARSE_DP_RNG_H_
