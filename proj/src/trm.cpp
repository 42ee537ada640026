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

#include "dtrn/trm.hpp"

#include <string>

namespace dtrn {

Var build_raw(std::span<const Var> sparse_embs, Var interest, std::size_t expected_width) {
  std::vector<Var> parts(sparse_embs.begin(), sparse_embs.end());
  parts.push_back(interest);
  const Var raw = concat_last(parts);
  if (expected_width != 0 && raw.shape().back() != expected_width) {
    throw DimensionError("bottom representation width " + std::to_string(raw.shape().back()) +
                         " does not match schema width " + std::to_string(expected_width));
  }
  return raw;
}

RefineNet::RefineNet(ParameterStore& store, std::size_t tasks, std::size_t width, std::size_t hidden,
                     std::uint64_t seed)
    : width_(width), hidden_(hidden) {
  if (tasks == 0 || width == 0 || hidden == 0) throw ConfigError("refine net needs tasks, width and hidden >= 1");
  for (std::size_t t = 0; t < tasks; ++t) {
    nets_.emplace_back(store, "trm." + std::to_string(t), width, hidden, width, seed, Activation::sigmoid);
  }
}

TaskBottomRepresentation RefineNet::refine(Tape& tape, Var raw, std::size_t task) const {
  if (task >= nets_.size()) throw IndexError("refine: task " + std::to_string(task) + " out of range");
  if (raw.shape().back() != width_) {
    throw DimensionError("refine: input width " + std::to_string(raw.shape().back()) + ", expected " +
                         std::to_string(width_));
  }
  TaskBottomRepresentation out;
  out.raw = raw;
  out.refine = nets_[task].forward(tape, raw);
  out.refined = mul(raw, out.refine);
  out.task = task;
  return out;
}

}  // namespace dtrn
