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

#include "sparse_dp/metrics.h"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace sparse_dp {

double Accuracy(std::span<const double> logits, std::span<const int> labels) {
  if (logits.empty()) return 0.0;
  int64_t correct = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    correct += (logits[i] > 0.0 ? 1 : 0) == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(logits.size());
}

double AreaUnderRoc(std::span<const double> scores,
                    std::span<const int> labels) {
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  double positives = 0;
  for (int label : labels) positives += label;
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0 || negatives == 0) return 0.5;

  double area = 0.0;
  double tp = 0, fp = 0;
  double prev_tpr = 0, prev_fpr = 0;
  for (size_t i = 0; i < n;) {
    // Consume all examples sharing this threshold.
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++j;
    }
    const double tpr = tp / positives;
    const double fpr = fp / negatives;
    area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_tpr = tpr;
    prev_fpr = fpr;
    i = j;
  }
  return area;
}

}  // namespace sparse_dp
