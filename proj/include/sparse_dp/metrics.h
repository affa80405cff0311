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

#ifndef SPARSE_DP_METRICS_H_
#define SPARSE_DP_METRICS_H_

#include <span>

namespace sparse_dp {

// Fraction of examples where (score > 0) matches the label.
double Accuracy(std::span<const double> logits, std::span<const int> labels);

// Area under the ROC curve by trapezoidal integration over the unique score
// thresholds. Returns 0.5 when only one class is present.
double AreaUnderRoc(std::span<const double> scores,
                    std::span<const int> labels);

}  // namespace sparse_dp

#endif  // SPARSE_DP_METRICS_H_
