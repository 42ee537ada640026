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

#include <cstdint>
#include <span>
#include <vector>

#include "dtrn/autodiff.hpp"
#include "dtrn/data.hpp"

namespace dtrn {

inline constexpr std::int64_t kPadId = 0;

/// Right-padded id matrix for one behavior type. mask[r][j] holds iff
/// j < lengths[r]. Histories longer than max_len keep their most recent
/// (trailing) items.
struct SequenceBatch {
  std::size_t batch = 0;
  std::size_t max_len = 0;
  std::vector<std::int64_t> ids;  // batch * max_len, row-major
  Mask mask;                      // [batch, max_len]
  std::vector<std::size_t> lengths;

  static SequenceBatch from_lists(std::span<const std::vector<std::int64_t>* const> lists, std::size_t max_len);
  bool any_nonempty() const noexcept;
  std::vector<bool> nonempty_rows() const;
};

/// Column-major view of a mini-batch, ready for lookups.
struct Batch {
  std::size_t size = 0;
  std::vector<std::vector<std::int64_t>> sparse;  // [N][batch]
  std::vector<SequenceBatch> seqs;                // [M]
  std::vector<std::int64_t> target;               // [batch]
  std::vector<std::vector<Scalar>> labels;        // [T][batch]

  static Batch build(std::span<const Instance> data, std::span<const std::size_t> rows, const FeatureSchema& schema);
  static Batch build(std::span<const Instance> data, const FeatureSchema& schema);
};

struct TypeEmbedding {
  Var task;      // [d]
  Var behavior;  // [d]
};

/// Sparse-feature tables, sequence tables, and the task/behavior-type
/// tables. Parameter names: emb.sparse.<i>, emb.seq.<b>, emb.task,
/// emb.behavior. Initialized uniformly in [-1/sqrt(d), 1/sqrt(d)].
class EmbeddingBank {
 public:
  EmbeddingBank(const FeatureSchema& schema, ParameterStore& store, std::uint64_t seed);

  // N tensors of [batch, d].
  std::vector<Var> embed_sparse(Tape& tape, const std::vector<std::vector<std::int64_t>>& ids) const;
  // [batch, max_len, d]; padded positions carry the pad row.
  Var embed_sequence(Tape& tape, const SequenceBatch& seq, std::size_t b) const;
  // Target items looked up in sequence b's table: [batch, d].
  Var embed_target(Tape& tape, std::span<const std::int64_t> target, std::size_t b) const;
  TypeEmbedding type_embeddings(Tape& tape, std::size_t task, std::size_t behavior) const;

  Parameter& sparse_table(std::size_t i) const { return *sparse_.at(i); }
  Parameter& sequence_table(std::size_t b) const { return *seq_.at(b); }
  Parameter& task_table() const { return *task_; }
  Parameter& behavior_table() const { return *behavior_; }
  const FeatureSchema& schema() const noexcept { return schema_; }

 private:
  FeatureSchema schema_;
  std::vector<Parameter*> sparse_;
  std::vector<Parameter*> seq_;
  Parameter* task_ = nullptr;
  Parameter* behavior_ = nullptr;
};

}  // namespace dtrn
