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

#include "sparse_dp/accountant.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"

namespace sparse_dp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEpsilonUpper = 1e3;
constexpr int kEpsilonIterations = 60;
constexpr double kSigmaRelativeAccuracy = 1e-3;
constexpr double kSigmaMin = 1e-3;
constexpr double kSigmaMax = 1e4;

// Mass of N(mean, stddev^2) on [a, b], computed on the side of the mean that
// keeps the tails accurate.
double NormalMass(double a, double b, double mean, double stddev) {
  if (!(b > a)) return 0.0;
  const double ta = (a - mean) / (stddev * M_SQRT2);
  const double tb = (b - mean) / (stddev * M_SQRT2);
  if (ta >= 0) return 0.5 * (std::erfc(ta) - std::erfc(tb));
  if (tb <= 0) return 0.5 * (std::erfc(-tb) - std::erfc(-ta));
  return 1.0 - 0.5 * std::erfc(tb) - 0.5 * std::erfc(-ta);
}

// z with Pr[Z >= z] = tail.
double UpperQuantile(double tail) {
  double lo = 0.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(mid / M_SQRT2) > tail) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

// ln(dP/dQ)(x) and its inverse for the subsampled Gaussian pair.
class SubsampledGaussianLoss {
 public:
  SubsampledGaussianLoss(double gamma, double sigma)
      : gamma_(gamma),
        sigma_(sigma),
        log_keep_(gamma < 1.0 ? std::log1p(-gamma) : -kInf) {}

  double Loss(double x) const {
    const double u = (2.0 * x - 1.0) / (2.0 * sigma_ * sigma_);
    if (gamma_ == 1.0) return u;
    const double a = log_keep_;
    const double b = std::log(gamma_) + u;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
  }

  // Smallest x with Loss(x) >= v; -inf when every x qualifies.
  double Inverse(double v) const {
    if (gamma_ == 1.0) return sigma_ * sigma_ * v + 0.5;
    if (v <= log_keep_) return -kInf;
    // ln(e^v - (1 - gamma)) = v + ln(1 - (1 - gamma) e^-v)
    const double log_diff = v + std::log1p(-std::exp(log_keep_ - v));
    return sigma_ * sigma_ * (log_diff - std::log(gamma_)) + 0.5;
  }

  // Mass of P on [a, b].
  double MassP(double a, double b) const {
    return (1.0 - gamma_) * NormalMass(a, b, 0.0, sigma_) +
           gamma_ * NormalMass(a, b, 1.0, sigma_);
  }
  // Mass of Q on [a, b].
  double MassQ(double a, double b) const {
    return NormalMass(a, b, 0.0, sigma_);
  }

  // Exact single-step hockey-stick divergence at e^epsilon.
  double Delta(NeighborDirection direction, double epsilon) const {
    if (direction == NeighborDirection::kRemove) {
      const double x = Inverse(epsilon);
      if (x == -kInf) return -std::expm1(epsilon);
      return std::max(0.0, MassP(x, kInf) - std::exp(epsilon) * MassQ(x, kInf));
    }
    const double x = Inverse(-epsilon);
    if (x == -kInf) return 0.0;
    return std::max(0.0,
                    MassQ(-kInf, x) - std::exp(epsilon) * MassP(-kInf, x));
  }

 private:
  double gamma_;
  double sigma_;
  double log_keep_;
};

double DeltaFromMasses(const std::vector<double>& masses, int64_t lowest,
                       double width, double infinity_mass, double epsilon) {
  double delta = infinity_mass;
  for (size_t i = 0; i < masses.size(); ++i) {
    const double loss = static_cast<double>(lowest + static_cast<int64_t>(i)) *
                        width;
    if (loss > epsilon) delta += -masses[i] * std::expm1(epsilon - loss);
  }
  return delta;
}

std::vector<double> Convolve(const std::vector<double>& a,
                             const std::vector<double>& b) {
  const size_t out_size = a.size() + b.size() - 1;
  std::vector<double> out(out_size, 0.0);
  if (std::min(a.size(), b.size()) <= 64 || a.size() * b.size() <= (1u << 16)) {
    for (size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0.0) continue;
      for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
  }
  size_t n = 1;
  while (n < out_size) n <<= 1;
  const size_t spectrum = n / 2 + 1;
  double* real = fftw_alloc_real(n);
  fftw_complex* fa = fftw_alloc_complex(spectrum);
  fftw_complex* fb = fftw_alloc_complex(spectrum);
  fftw_plan forward_a = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, fa,
                                             FFTW_ESTIMATE);
  fftw_plan forward_b = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, fb,
                                             FFTW_ESTIMATE);
  fftw_plan backward = fftw_plan_dft_c2r_1d(static_cast<int>(n), fa, real,
                                            FFTW_ESTIMATE);
  std::fill(real, real + n, 0.0);
  std::copy(a.begin(), a.end(), real);
  fftw_execute(forward_a);
  std::fill(real, real + n, 0.0);
  std::copy(b.begin(), b.end(), real);
  fftw_execute(forward_b);
  for (size_t k = 0; k < spectrum; ++k) {
    const std::complex<double> x(fa[k][0], fa[k][1]);
    const std::complex<double> y(fb[k][0], fb[k][1]);
    const std::complex<double> z = x * y;
    fa[k][0] = z.real();
    fa[k][1] = z.imag();
  }
  fftw_execute(backward);
  const double scale = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < out_size; ++i) {
    out[i] = std::max(0.0, real[i] * scale);
  }
  fftw_destroy_plan(forward_a);
  fftw_destroy_plan(forward_b);
  fftw_destroy_plan(backward);
  fftw_free(real);
  fftw_free(fa);
  fftw_free(fb);
  return out;
}

absl::Status ValidateMechanism(double gamma, double sigma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    return absl::InvalidArgumentError("sampling rate must be in (0, 1]");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    return absl::InvalidArgumentError("noise multiplier must be positive");
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<PrivacyLossDistribution>
PrivacyLossDistribution::ForSubsampledGaussian(double gamma, double sigma,
                                               NeighborDirection direction,
                                               const PldOptions& options) {
  if (absl::Status status = ValidateMechanism(gamma, sigma); !status.ok()) {
    return status;
  }
  const double width = options.grid_width;
  if (!(width > 0.0)) {
    return absl::InvalidArgumentError("grid width must be positive");
  }
  const SubsampledGaussianLoss loss(gamma, sigma);
  const double z = UpperQuantile(options.tail_mass / 2.0);

  int64_t lowest = 0;
  int64_t highest = 0;
  std::vector<double> masses;
  double infinity_mass = 0.0;
  auto check_size = [&]() -> absl::Status {
    if (highest - lowest + 1 > options.max_grid_points) {
      return absl::OutOfRangeError(absl::StrCat(
          "privacy loss grid needs ", highest - lowest + 1,
          " points; increase the grid width"));
    }
    return absl::OkStatus();
  };
  auto too_coarse = [&](double error) {
    return absl::OutOfRangeError(absl::StrCat(
        "grid width ", width, " too coarse: discretization error ", error,
        " exceeds ", options.max_discretization_error));
  };

  // Loss range covering all but tail_mass of the relevant measure.
  const double x_lo = -sigma * z;
  const double x_hi =
      (direction == NeighborDirection::kRemove ? 1.0 : 0.0) + sigma * z;
  const double loss_lo = direction == NeighborDirection::kRemove
                             ? loss.Loss(x_lo)
                             : -loss.Loss(x_hi);
  const double loss_hi = direction == NeighborDirection::kRemove
                             ? loss.Loss(x_hi)
                             : -loss.Loss(x_lo);

  if (options.discretization == Discretization::kConnectDots) {
    lowest = static_cast<int64_t>(std::floor(loss_lo / width));
    highest = std::max(lowest + 1,
                       static_cast<int64_t>(std::ceil(loss_hi / width)));
    if (absl::Status status = check_size(); !status.ok()) return status;
    const size_t n = static_cast<size_t>(highest - lowest);
    const double step_growth = std::expm1(width);
    std::vector<double> deltas(n + 1);
    std::vector<double> exp_eps(n + 1);
    for (size_t i = 0; i <= n; ++i) {
      const double epsilon =
          static_cast<double>(lowest + static_cast<int64_t>(i)) * width;
      deltas[i] = loss.Delta(direction, epsilon);
      exp_eps[i] = std::exp(epsilon);
    }
    // slopes[i] is minus the slope of delta against e^epsilon on
    // [eps_i, eps_{i+1}]; zero past the last grid point.
    std::vector<double> slopes(n + 1, 0.0);
    for (size_t i = 0; i < n; ++i) {
      slopes[i] = std::max(0.0, (deltas[i] - deltas[i + 1]) /
                                    (exp_eps[i] * step_growth));
    }
    masses.assign(n + 1, 0.0);
    infinity_mass = deltas[n];
    double upper_mass = 0.0;
    for (size_t j = 1; j <= n; ++j) {
      masses[j] = std::max(0.0, exp_eps[j] * (slopes[j - 1] - slopes[j]));
      upper_mass += masses[j];
    }
    masses[0] = std::max(0.0, 1.0 - infinity_mass - upper_mass);

    double error = 0.0;
    const double half_growth = std::expm1(0.5 * width);
    for (size_t i = 0; i < n; ++i) {
      const double epsilon =
          (static_cast<double>(lowest + static_cast<int64_t>(i)) + 0.5) *
          width;
      const double interpolated =
          deltas[i] - slopes[i] * exp_eps[i] * half_growth;
      error = std::max(error, interpolated - loss.Delta(direction, epsilon));
    }
    if (error > options.max_discretization_error) return too_coarse(error);
  } else {
    lowest = static_cast<int64_t>(std::ceil(loss_lo / width));
    highest = static_cast<int64_t>(std::ceil(loss_hi / width));
    if (absl::Status status = check_size(); !status.ok()) return status;
    masses.resize(highest - lowest + 1);
    if (direction == NeighborDirection::kRemove) {
      // Loss increasing in x, x ~ P.
      double previous =
          std::min(loss.Inverse(static_cast<double>(lowest) * width), x_hi);
      masses[0] = loss.MassP(-kInf, previous);
      for (int64_t i = lowest + 1; i <= highest; ++i) {
        const double upper =
            std::min(loss.Inverse(static_cast<double>(i) * width), x_hi);
        masses[i - lowest] = loss.MassP(previous, upper);
        previous = upper;
      }
      infinity_mass = loss.MassP(x_hi, kInf);
    } else {
      // Loss -Loss(x) decreasing in x, x ~ Q.
      double previous =
          std::max(loss.Inverse(-static_cast<double>(lowest) * width), x_lo);
      masses[0] = loss.MassQ(previous, kInf);
      for (int64_t i = lowest + 1; i <= highest; ++i) {
        const double lower =
            std::max(loss.Inverse(-static_cast<double>(i) * width), x_lo);
        masses[i - lowest] = loss.MassQ(lower, previous);
        previous = lower;
      }
      infinity_mass = loss.MassQ(-kInf, x_lo);
    }
    const double pessimistic =
        DeltaFromMasses(masses, lowest, width, infinity_mass, 0.0);
    const double optimistic =
        DeltaFromMasses(masses, lowest - 1, width, infinity_mass, 0.0);
    if (pessimistic - optimistic > options.max_discretization_error) {
      return too_coarse(pessimistic - optimistic);
    }
  }
  PrivacyLossDistribution pld(width, direction, lowest, std::move(masses),
                              infinity_mass);
  pld.Truncate(options.tail_mass);
  return pld;
}

PrivacyLossDistribution PrivacyLossDistribution::Identity(
    double grid_width, NeighborDirection direction) {
  return PrivacyLossDistribution(grid_width, direction, 0, {1.0}, 0.0);
}

double PrivacyLossDistribution::DeltaForEpsilon(double epsilon) const {
  return std::min(1.0, DeltaFromMasses(masses_, lowest_index_, grid_width_,
                                       infinity_mass_, epsilon));
}

void PrivacyLossDistribution::Truncate(double tail_mass) {
  if (masses_.empty()) return;
  size_t first = 0;
  double left = 0.0;
  while (first + 1 < masses_.size() && left + masses_[first] <= tail_mass) {
    left += masses_[first++];
  }
  size_t last = masses_.size();
  double right = 0.0;
  while (last > first + 1 && right + masses_[last - 1] <= tail_mass) {
    right += masses_[--last];
  }
  std::vector<double> kept(masses_.begin() + first, masses_.begin() + last);
  kept.front() += left;
  lowest_index_ += static_cast<int64_t>(first);
  masses_ = std::move(kept);
  infinity_mass_ += right;
}

absl::StatusOr<PrivacyLossDistribution> PrivacyLossDistribution::Compose(
    const PrivacyLossDistribution& other, const PldOptions& options) const {
  if (grid_width_ != other.grid_width_) {
    return absl::InvalidArgumentError("grid widths differ");
  }
  const int64_t size =
      static_cast<int64_t>(masses_.size() + other.masses_.size()) - 1;
  if (size > options.max_grid_points) {
    return absl::OutOfRangeError(
        absl::StrCat("composed distribution needs ", size, " grid points"));
  }
  PrivacyLossDistribution result(
      grid_width_, direction_, lowest_index_ + other.lowest_index_,
      Convolve(masses_, other.masses_),
      infinity_mass_ + other.infinity_mass_ -
          infinity_mass_ * other.infinity_mass_);
  result.Truncate(options.tail_mass);
  return result;
}

absl::StatusOr<PrivacyLossDistribution> PrivacyLossDistribution::SelfCompose(
    int64_t times, const PldOptions& options) const {
  if (times < 1) return absl::InvalidArgumentError("times must be >= 1");
  std::optional<PrivacyLossDistribution> result;
  PrivacyLossDistribution base = *this;
  while (true) {
    if (times & 1) {
      if (!result.has_value()) {
        result = base;
      } else {
        absl::StatusOr<PrivacyLossDistribution> next =
            result->Compose(base, options);
        if (!next.ok()) return next.status();
        result = *std::move(next);
      }
    }
    times >>= 1;
    if (times == 0) break;
    absl::StatusOr<PrivacyLossDistribution> squared =
        base.Compose(base, options);
    if (!squared.ok()) return squared.status();
    base = *std::move(squared);
  }
  return *std::move(result);
}

double PldPair::DeltaForEpsilon(double epsilon) const {
  return std::max(remove.DeltaForEpsilon(epsilon), add.DeltaForEpsilon(epsilon));
}

absl::StatusOr<PldPair> BuildPld(double gamma, double sigma,
                                 const PldOptions& options) {
  absl::StatusOr<PrivacyLossDistribution> remove =
      PrivacyLossDistribution::ForSubsampledGaussian(
          gamma, sigma, NeighborDirection::kRemove, options);
  if (!remove.ok()) return remove.status();
  absl::StatusOr<PrivacyLossDistribution> add =
      PrivacyLossDistribution::ForSubsampledGaussian(
          gamma, sigma, NeighborDirection::kAdd, options);
  if (!add.ok()) return add.status();
  return PldPair{*std::move(remove), *std::move(add)};
}

absl::StatusOr<PldPair> ComposePld(const PldPair& pld, int64_t steps,
                                   const PldOptions& options) {
  absl::StatusOr<PrivacyLossDistribution> remove =
      pld.remove.SelfCompose(steps, options);
  if (!remove.ok()) return remove.status();
  absl::StatusOr<PrivacyLossDistribution> add =
      pld.add.SelfCompose(steps, options);
  if (!add.ok()) return add.status();
  return PldPair{*std::move(remove), *std::move(add)};
}

double EpsilonForDelta(const PldPair& pld, double delta) {
  if (pld.DeltaForEpsilon(0.0) <= delta) return 0.0;
  if (pld.DeltaForEpsilon(kEpsilonUpper) > delta) return kInf;
  double lo = 0.0;
  double hi = kEpsilonUpper;
  for (int i = 0; i < kEpsilonIterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (pld.DeltaForEpsilon(mid) <= delta) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

absl::StatusOr<double> EpsilonFor(double sigma, double gamma, int64_t steps,
                                  double delta, const PldOptions& options) {
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("delta must be in (0, 1)");
  }
  if (steps < 1) return absl::InvalidArgumentError("steps must be >= 1");
  if (sigma == kInf) return 0.0;
  absl::StatusOr<PldPair> single = BuildPld(gamma, sigma, options);
  if (!single.ok()) return single.status();
  absl::StatusOr<PldPair> composed = ComposePld(*single, steps, options);
  if (!composed.ok()) return composed.status();
  return EpsilonForDelta(*composed, delta);
}

absl::StatusOr<double> CalibrateSigma(double epsilon, double delta,
                                      double gamma, int64_t steps,
                                      const PldOptions& options) {
  if (!(epsilon > 0.0)) {
    return absl::InvalidArgumentError("epsilon must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("delta must be in (0, 1)");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    return absl::InvalidArgumentError("sampling rate must be in (0, 1]");
  }
  if (steps < 1) return absl::InvalidArgumentError("steps must be >= 1");
  // Grids that cannot be built (sigma too small) count as failing.
  auto satisfies = [&](double sigma) {
    absl::StatusOr<double> eps = EpsilonFor(sigma, gamma, steps, delta, options);
    return eps.ok() && *eps <= epsilon;
  };
  double hi = 1.0;
  while (!satisfies(hi)) {
    hi *= 2.0;
    if (hi > kSigmaMax) {
      return absl::OutOfRangeError(absl::StrCat(
          "no noise multiplier up to ", kSigmaMax, " achieves epsilon ",
          epsilon));
    }
  }
  double lo = hi / 2.0;
  while (satisfies(lo)) {
    hi = lo;
    lo /= 2.0;
    if (lo < kSigmaMin) return hi;
  }
  while (hi - lo > kSigmaRelativeAccuracy * lo) {
    const double mid = 0.5 * (lo + hi);
    if (satisfies(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

absl::StatusOr<double> ComposeGaussianSigmas(double sigma1, double sigma2) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) {
    return absl::InvalidArgumentError(
        "noise multipliers must be positive (use infinity to disable one)");
  }
  if (sigma1 == kInf && sigma2 == kInf) return kInf;
  return 1.0 / std::sqrt(1.0 / (sigma1 * sigma1) + 1.0 / (sigma2 * sigma2));
}

SigmaPair SplitSigma(double sigma_effective, double ratio) {
  const double sigma2 = sigma_effective * std::sqrt(1.0 + 1.0 / (ratio * ratio));
  return {ratio * sigma2, sigma2};
}

absl::StatusOr<double> AdaFestBudget(double sigma1, double sigma2,
                                     double gamma, int64_t steps, double delta,
                                     const PldOptions& options) {
  absl::StatusOr<double> sigma = ComposeGaussianSigmas(sigma1, sigma2);
  if (!sigma.ok()) return sigma.status();
  return EpsilonFor(*sigma, gamma, steps, delta, options);
}

EpsilonDelta DpFestBudget(const EpsilonDelta& training,
                          double selection_epsilon) {
  return {training.epsilon + selection_epsilon, training.delta};
}

absl::Status BudgetSpec::Validate() const {
  if (!(epsilon > 0.0)) {
    return absl::InvalidArgumentError("epsilon must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("delta must be in (0, 1)");
  }
  if (!(selection_epsilon >= 0.0) || !(selection_epsilon < epsilon)) {
    return absl::InvalidArgumentError(
        "selection epsilon must be in [0, epsilon)");
  }
  return absl::OkStatus();
}

double ExcessLossBound(double lipschitz, double bias, double noise_stddev,
                       double diameter, int64_t steps) {
  const double t = static_cast<double>(steps);
  return diameter / std::sqrt(t) *
             std::sqrt((lipschitz + bias) * (lipschitz + bias) +
                       noise_stddev * noise_stddev) +
         bias * diameter;
}

bool SparseTradeoffFavorable(double lipschitz, double truncated_fraction,
                             double support, double dimension,
                             double noise_stddev, int64_t steps) {
  const double l = lipschitz;
  const double g = truncated_fraction;
  const double s2 = noise_stddev * noise_stddev;
  const double lhs = std::sqrt(l * l * (1.0 + g) * (1.0 + g) + support * s2) +
                     g * l * std::sqrt(static_cast<double>(steps));
  const double rhs = std::sqrt(l * l + dimension * s2);
  return lhs < rhs;
}

}  // namespace sparse_dp
