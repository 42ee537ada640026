// Copyright 2026 The DTRN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dtrn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace dtrn {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t m = i; m < j; ++m) {
      const int y = labels[order[m]];
      if (y != 0 && y != 1) throw Error("auc: label " + std::to_string(y) + " is not binary");
      if (y == 1) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error("auc is undefined: labels contain a single class");
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double logloss(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw DimensionError("logloss: probabilities and labels differ in length");
  if (probs.empty()) throw DimensionError("logloss: empty input");
  constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], lo, hi);
    total -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

std::vector<double> silhouette_by_cluster(const std::vector<std::vector<double>>& points,
                                          std::span<const std::size_t> cluster) {
  const std::size_t n = points.size();
  if (cluster.size() != n) throw DimensionError("silhouette: one cluster id per point required");
  const std::size_t k = n == 0 ? 0 : *std::max_element(cluster.begin(), cluster.end()) + 1;
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t c : cluster) ++sizes[c];
  if (std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; }) < 2) {
    throw Error("silhouette needs at least two non-empty clusters");
  }
  std::vector<double> sum(k, 0.0);
  std::vector<double> dist(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dist.begin(), dist.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double s = 0.0;
      for (std::size_t f = 0; f < points[i].size(); ++f) {
        const double diff = points[i][f] - points[j][f];
        s += diff * diff;
      }
      dist[cluster[j]] += std::sqrt(s);
    }
    const std::size_t own = cluster[i];
    if (sizes[own] < 2) continue;
    const double a = dist[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != own && sizes[c] > 0) b = std::min(b, dist[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    sum[own] += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  std::vector<double> out(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] > 0) out[c] = sum[c] / static_cast<double>(sizes[c]);
  }
  return out;
}

}  // namespace dtrn
