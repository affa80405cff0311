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

// Numerical privacy accounting for the Poisson-subsampled Gaussian mechanism
// using discretized privacy loss distributions (PLDs).
//
// A single step is dominated by the pair
//   P = (1 - gamma) N(0, sigma^2) + gamma N(1, sigma^2),   Q = N(0, sigma^2),
// and T steps by (P^T, Q^T). The remove direction tracks ln(dP/dQ) under P,
// the add direction ln(dQ/dP) under Q; reported epsilons use the worse of
// the two. Both discretizations below dominate the true loss distribution
// and truncated tail mass is charged to delta, so every delta computed here
// is an upper bound.

#ifndef SPARSE_DP_ACCOUNTANT_H_
#define SPARSE_DP_ACCOUNTANT_H_

#include <cstdint>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace sparse_dp {

enum class NeighborDirection { kRemove, kAdd };

enum class Discretization {
  // Places mass on the grid so that the hockey-stick curve interpolates the
  // exact single-step curve between grid points (Doroshenko et al., 2022).
  // Exact at grid points and never below the true curve in between.
  kConnectDots,
  // Moves each loss up to the next grid point. Simple but biased upward by
  // about grid_width / 2 per composed step.
  kRoundUp,
};

struct PldOptions {
  // Spacing of the privacy-loss grid.
  double grid_width = 1e-3;
  Discretization discretization = Discretization::kConnectDots;
  // Mass dropped from each tail at construction and after each convolution.
  double tail_mass = 1e-12;
  // Construction fails if the single-step delta error caused by the grid
  // exceeds this. For kConnectDots the error is measured at grid midpoints;
  // for kRoundUp it is the gap between rounding up and rounding down at
  // epsilon = 0.
  double max_discretization_error = 1e-2;
  int64_t max_grid_points = int64_t{1} << 23;
};

class PrivacyLossDistribution {
 public:
  static absl::StatusOr<PrivacyLossDistribution> ForSubsampledGaussian(
      double gamma, double sigma, NeighborDirection direction,
      const PldOptions& options = {});

  // Point mass at zero loss; the neutral element of Compose.
  static PrivacyLossDistribution Identity(double grid_width,
                                          NeighborDirection direction);

  double grid_width() const { return grid_width_; }
  NeighborDirection direction() const { return direction_; }
  // Grid index of masses()[0]; the loss of masses()[i] is
  // (lowest_index() + i) * grid_width().
  int64_t lowest_index() const { return lowest_index_; }
  const std::vector<double>& masses() const { return masses_; }
  // Probability of an unbounded loss, charged to delta in full.
  double infinity_mass() const { return infinity_mass_; }

  // Hockey-stick divergence at e^epsilon.
  double DeltaForEpsilon(double epsilon) const;

  // Distribution of the summed losses of two independent mechanisms.
  absl::StatusOr<PrivacyLossDistribution> Compose(
      const PrivacyLossDistribution& other,
      const PldOptions& options = {}) const;

  // `times`-fold self composition by repeated squaring.
  absl::StatusOr<PrivacyLossDistribution> SelfCompose(
      int64_t times, const PldOptions& options = {}) const;

 private:
  PrivacyLossDistribution(double grid_width, NeighborDirection direction,
                          int64_t lowest_index, std::vector<double> masses,
                          double infinity_mass)
      : grid_width_(grid_width),
        direction_(direction),
        lowest_index_(lowest_index),
        masses_(std::move(masses)),
        infinity_mass_(infinity_mass) {}

  // Drops tails lighter than `tail_mass`: the left tail moves onto the first
  // kept point, the right tail into infinity_mass_.
  void Truncate(double tail_mass);

  double grid_width_;
  NeighborDirection direction_;
  int64_t lowest_index_;
  std::vector<double> masses_;
  double infinity_mass_;
};

// Both directions of one mechanism.
struct PldPair {
  PrivacyLossDistribution remove;
  PrivacyLossDistribution add;

  double DeltaForEpsilon(double epsilon) const;
};

absl::StatusOr<PldPair> BuildPld(double gamma, double sigma,
                                 const PldOptions& options = {});

absl::StatusOr<PldPair> ComposePld(const PldPair& pld, int64_t steps,
                                   const PldOptions& options = {});

// Smallest epsilon (bisection on [0, 1e3], 60 iterations) whose delta is at
// most `delta`. Returns +infinity if even 1e3 does not suffice.
double EpsilonForDelta(const PldPair& pld, double delta);

// Epsilon of `steps` compositions of the subsampled Gaussian mechanism.
absl::StatusOr<double> EpsilonFor(double sigma, double gamma, int64_t steps,
                                  double delta, const PldOptions& options = {});

// Smallest noise multiplier (to 1e-3 relative) meeting (epsilon, delta).
absl::StatusOr<double> CalibrateSigma(double epsilon, double delta,
                                      double gamma, int64_t steps,
                                      const PldOptions& options = {});

// Noise multiplier of the single Gaussian mechanism equivalent to running
// mechanisms with multipliers sigma1 and sigma2: (sigma1^-2 + sigma2^-2)^-1/2.
// Either argument may be +infinity (mechanism disabled).
absl::StatusOr<double> ComposeGaussianSigmas(double sigma1, double sigma2);

// Splits a target effective multiplier into (sigma1, sigma2) with
// sigma1 / sigma2 == ratio.
struct SigmaPair {
  double sigma1 = 0.0;
  double sigma2 = 0.0;
};
SigmaPair SplitSigma(double sigma_effective, double ratio);

// Epsilon spent by DP-AdaFEST (contribution map and gradient noise).
absl::StatusOr<double> AdaFestBudget(double sigma1, double sigma2,
                                     double gamma, int64_t steps, double delta,
                                     const PldOptions& options = {});

struct EpsilonDelta {
  double epsilon = 0.0;
  double delta = 0.0;
};

// Training budget plus a pure-DP selection budget, by basic composition.
EpsilonDelta DpFestBudget(const EpsilonDelta& training,
                          double selection_epsilon);

struct BudgetSpec {
  double epsilon = 1.0;
  double delta = 1e-5;
  // Spent on DP top-k selection and deducted before calibrating training.
  double selection_epsilon = 0.0;

  absl::Status Validate() const;
  double TrainingEpsilon() const { return epsilon - selection_epsilon; }
};

// Expected excess loss of projected SGD with a biased, noisy gradient oracle:
//   R / sqrt(T) * sqrt((L + bias)^2 + stddev^2) + bias * R.
double ExcessLossBound(double lipschitz, double bias, double noise_stddev,
                       double diameter, int64_t steps);

// True when truncating a fraction `truncated_fraction` of the gradient onto
// `support` coordinates (out of `dimension`) beats dense noise:
//   sqrt(L^2 (1 + g)^2 + h s^2) + g L sqrt(T) < sqrt(L^2 + D s^2).
bool SparseTradeoffFavorable(double lipschitz, double truncated_fraction,
                             double support, double dimension,
                             double noise_stddev, int64_t steps);

}  // namespace sparse_dp

#endif  // SPARSE_DP_ACCOUNTANT_H_
