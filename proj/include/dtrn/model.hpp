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

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dtrn/config.hpp"
#include "dtrn/data.hpp"
#include "dtrn/embedding.hpp"
#include "dtrn/heads.hpp"
#include "dtrn/transformer.hpp"
#include "dtrn/trm.hpp"

namespace dtrn {

/// baseline: one unconditioned interest per behavior shared by all tasks,
/// no gate. +TIM adds per-(task, behavior) conditioning, +TRM adds the
/// per-task gate, DTRN has both.
enum class Variant { baseline, tim, trm, dtrn };

Variant parse_variant(std::string_view name);
std::string_view to_string(Variant v);

struct ModelConfig {
  std::size_t heads = 2;
  std::size_t d_f = 32;
  std::size_t enc_layers = 1;
  std::size_t dec_layers = 1;
  bool use_tim = true;
  bool use_trm = true;
  InjectionSite injection_site = InjectionSite::ln;
  std::size_t hyper_hidden = 0;  // 0: 2d
  std::size_t trm_hidden = 0;    // 0: D/4
  HeadKind head = HeadKind::share_bottom;
  std::size_t n_experts = 4;
  std::size_t expert_hidden = 32;
  std::size_t tower_hidden = 16;
  std::string aitm_chains;
  std::vector<std::size_t> remove_tasks;

  void set_variant(Variant v);
  Variant variant() const;

  static ModelConfig from_config(const KeyValueConfig& kv);
  void write(KeyValueConfig& kv) const;
  static const std::set<std::string>& keys();
};

struct ModelOutput {
  TaskLogits logits;
  // interests[t][b]: [B, d]. With TIM disabled every task shares the same
  // per-behavior nodes. Removed tasks have no entries.
  std::vector<std::vector<Var>> interests;
  std::vector<TaskBottomRepresentation> bottoms;
};

/// Owns its parameters. Construction is deterministic in (schema, config, seed).
class DtrnModel {
 public:
  DtrnModel(const FeatureSchema& schema, const ModelConfig& cfg, std::uint64_t seed);
  DtrnModel(const DtrnModel&) = delete;
  DtrnModel& operator=(const DtrnModel&) = delete;

  ModelOutput forward(Tape& tape, const Batch& batch) const;

  ParameterStore& parameters() noexcept { return *store_; }
  const ParameterStore& parameters() const noexcept { return *store_; }
  const FeatureSchema& schema() const noexcept { return schema_; }
  const ModelConfig& config() const noexcept { return cfg_; }
  const EmbeddingBank& embeddings() const noexcept { return *bank_; }
  const ConditionalTransformer& tim() const noexcept { return *tim_; }
  const RefineNet* trm() const noexcept { return trm_.get(); }
  const MultiTaskHead& head() const noexcept { return *head_; }
  bool task_active(std::size_t t) const { return active_.at(t); }
  std::size_t bottom_width() const noexcept { return schema_.bottom_width(); }

  // Scalars in the interest module (base Transformer plus hypernetwork).
  std::size_t tim_parameter_count() const noexcept { return store_->scalar_count("tim."); }

 private:
  FeatureSchema schema_;
  ModelConfig cfg_;
  std::vector<bool> active_;
  std::unique_ptr<ParameterStore> store_;
  std::unique_ptr<EmbeddingBank> bank_;
  std::unique_ptr<ConditionalTransformer> tim_;
  std::unique_ptr<RefineNet> trm_;
  std::unique_ptr<MultiTaskHead> head_;
};

}  // namespace dtrn
