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

#include <span>
#include <vector>

#include "dtrn/layers.hpp"

namespace dtrn {

struct TaskBottomRepresentation {
  Var raw;      // [B, D]
  Var refine;   // [B, D], entries in (0, 1); invalid when no gate was applied
  Var refined;  // [B, D]
  std::size_t task = 0;
};

// [e_1, ..., e_N, interest_t] along the feature axis. `expected_width` of 0
// skips the width check.
Var build_raw(std::span<const Var> sparse_embs, Var interest, std::size_t expected_width = 0);

/// One independent gate network per task: D -> hidden (ReLU) -> D (sigmoid).
/// Parameters are named "trm.<t>.l1.*" and "trm.<t>.l2.*".
class RefineNet {
 public:
  RefineNet(ParameterStore& store, std::size_t tasks, std::size_t width, std::size_t hidden, std::uint64_t seed);

  TaskBottomRepresentation refine(Tape& tape, Var raw, std::size_t task) const;

  std::size_t tasks() const noexcept { return nets_.size(); }
  std::size_t width() const noexcept { return width_; }
  std::size_t hidden() const noexcept { return hidden_; }
  const Mlp2& net(std::size_t task) const { return nets_.at(task); }

 private:
  std::vector<Mlp2> nets_;
  std::size_t width_;
  std::size_t hidden_;
};

}  // namespace dtrn
