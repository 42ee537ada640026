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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dtrn/tensor.hpp"

namespace dtrn {

// Mann-Whitney AUC with average ranks for ties. Throws Error when the labels
// hold a single class.
double auc(std::span<const double> scores, std::span<const int> labels);

// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
double logloss(std::span<const double> probs, std::span<const int> labels);

// Mean silhouette coefficient of the points in each cluster (Euclidean
// distance). Points in singleton clusters score 0. Needs >= 2 clusters.
std::vector<double> silhouette_by_cluster(const std::vector<std::vector<double>>& points,
                                          std::span<const std::size_t> cluster);

}  // namespace dtrn
