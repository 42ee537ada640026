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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtrn/layers.hpp"

namespace dtrn {

enum class HeadKind { share_bottom, mmoe, ple, aitm };

HeadKind parse_head_kind(std::string_view name);
std::string_view to_string(HeadKind kind);

/// `active[t] == false` removes task t: no tower, no loss term, no logits.
struct HeadConfig {
  HeadKind kind = HeadKind::share_bottom;
  std::size_t tasks = 1;
  std::size_t width = 1;  // D, the bottom representation width
  std::size_t n_experts = 4;
  std::size_t expert_hidden = 32;
  std::size_t tower_hidden = 16;
  std::string aitm_chains;  // "0>1;0>2>3"; empty means no transfer
  std::vector<bool> active;  // empty means all active

  void validate() const;
  bool is_active(std::size_t t) const { return active.empty() || active.at(t); }
};

// Predecessor of each task along the chains, after splicing out inactive
// tasks. Throws ConfigError for out-of-range ids, a task with two different
// predecessors, or a cycle.
std::vector<std::optional<std::size_t>> parse_aitm_chains(std::string_view chains, std::size_t tasks,
                                                          const std::vector<bool>& active = {});

/// Per-task logits o_t ([B]); entries of removed tasks stay invalid. `gates`
/// holds per-task gate weights ([B, E]) for mmoe/ple.
struct TaskLogits {
  std::vector<Var> o;
  std::vector<Var> gates;
  std::vector<Var> tower_inputs;

  // [B, T]; columns of removed tasks are 0 (logits) or 0.5 (probabilities).
  Tensor logits() const;
  Tensor probabilities() const;
};

/// Experts and tower trunks: in -> expert_hidden (ReLU) -> expert_hidden (ReLU).
/// Towers: expert_hidden -> tower_hidden (ReLU) -> 1.
class MultiTaskHead {
 public:
  MultiTaskHead(ParameterStore& store, const HeadConfig& cfg, std::uint64_t seed);

  // reps[t] is task t's bottom representation [B, D]; ignored for removed tasks.
  TaskLogits forward(Tape& tape, std::span<const Var> reps) const;

  const HeadConfig& config() const noexcept { return cfg_; }
  const std::vector<std::optional<std::size_t>>& predecessors() const noexcept { return pred_; }

 private:
  Var mix(Var gate_logits, std::span<const Var> experts) const;

  HeadConfig cfg_;
  std::vector<std::optional<std::size_t>> pred_;
  std::vector<std::size_t> order_;
  Mlp2 trunk_;
  std::vector<Mlp2> experts_;   // mmoe: all experts; ple: shared experts
  std::vector<Mlp2> specific_;  // ple: one per task; aitm: own-representation encoder per task
  std::vector<Linear> gates_;
  std::vector<Linear> transfer_, attn_q_, attn_k_, attn_v_;
  std::vector<Mlp2> towers_;
};

// Sum over active tasks of the mean binary cross-entropy from logits.
// Labels must be exactly 0 or 1.
Var total_loss(const TaskLogits& out, const std::vector<std::vector<Scalar>>& labels);

}  // namespace dtrn
