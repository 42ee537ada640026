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

#include "dtrn/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtrn/layers.hpp"

namespace dtrn {

SequenceBatch SequenceBatch::from_lists(std::span<const std::vector<std::int64_t>* const> lists, std::size_t max_len) {
  if (lists.empty() || max_len == 0) throw DimensionError("SequenceBatch needs at least one row and max_len >= 1");
  SequenceBatch s;
  s.batch = lists.size();
  s.max_len = max_len;
  s.ids.assign(s.batch * max_len, kPadId);
  s.mask = Mask({s.batch, max_len}, false);
  s.lengths.resize(s.batch);
  for (std::size_t r = 0; r < s.batch; ++r) {
    const auto& items = *lists[r];
    const std::size_t len = std::min(items.size(), max_len);
    const std::size_t skip = items.size() - len;
    for (std::size_t j = 0; j < len; ++j) {
      s.ids[r * max_len + j] = items[skip + j];
      s.mask.set(r * max_len + j, true);
    }
    s.lengths[r] = len;
  }
  return s;
}

bool SequenceBatch::any_nonempty() const noexcept {
  return std::any_of(lengths.begin(), lengths.end(), [](std::size_t n) { return n > 0; });
}

std::vector<bool> SequenceBatch::nonempty_rows() const {
  std::vector<bool> keep(batch);
  for (std::size_t r = 0; r < batch; ++r) keep[r] = lengths[r] > 0;
  return keep;
}

Batch Batch::build(std::span<const Instance> data, std::span<const std::size_t> rows, const FeatureSchema& schema) {
  if (rows.empty()) throw DimensionError("empty batch");
  Batch b;
  b.size = rows.size();
  b.sparse.assign(schema.n_sparse, std::vector<std::int64_t>(b.size));
  b.labels.assign(schema.n_tasks, std::vector<Scalar>(b.size));
  b.target.resize(b.size);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Instance& inst = data[rows[k]];
    for (std::size_t i = 0; i < schema.n_sparse; ++i) b.sparse[i][k] = inst.sparse.at(i);
    for (std::size_t t = 0; t < schema.n_tasks; ++t) b.labels[t][k] = inst.labels.at(t);
    b.target[k] = inst.target;
  }
  std::vector<const std::vector<std::int64_t>*> lists(b.size);
  for (std::size_t s = 0; s < schema.n_seqs; ++s) {
    for (std::size_t k = 0; k < rows.size(); ++k) lists[k] = &data[rows[k]].seqs.at(s);
    b.seqs.push_back(SequenceBatch::from_lists(lists, schema.max_len[s]));
  }
  return b;
}

Batch Batch::build(std::span<const Instance> data, const FeatureSchema& schema) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  return build(data, rows, schema);
}

EmbeddingBank::EmbeddingBank(const FeatureSchema& schema, ParameterStore& store, std::uint64_t seed)
    : schema_(schema) {
  schema_.validate();
  const std::size_t d = schema_.dim;
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(d));
  auto table = [&](const std::string& name, std::size_t rows) {
    return &store.add(name, uniform_tensor({rows, d}, bound, parameter_stream_seed(seed, name)));
  };
  for (std::size_t i = 0; i < schema_.n_sparse; ++i) {
    sparse_.push_back(table("emb.sparse." + std::to_string(i), schema_.sparse_vocab[i]));
  }
  for (std::size_t b = 0; b < schema_.n_seqs; ++b) {
    seq_.push_back(table("emb.seq." + std::to_string(b), schema_.seq_vocab[b]));
  }
  task_ = table("emb.task", schema_.n_tasks);
  behavior_ = table("emb.behavior", schema_.n_seqs);
}

std::vector<Var> EmbeddingBank::embed_sparse(Tape& tape, const std::vector<std::vector<std::int64_t>>& ids) const {
  if (ids.size() != schema_.n_sparse) {
    throw DimensionError("embed_sparse: " + std::to_string(ids.size()) + " id columns, schema has " +
                         std::to_string(schema_.n_sparse));
  }
  std::vector<Var> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out.push_back(gather_rows(tape.param(*sparse_[i]), ids[i]));
  return out;
}

Var EmbeddingBank::embed_sequence(Tape& tape, const SequenceBatch& seq, std::size_t b) const {
  if (b >= seq_.size()) throw IndexError("embed_sequence: behavior " + std::to_string(b) + " out of range");
  Var flat = gather_rows(tape.param(*seq_[b]), seq.ids);
  return reshape(flat, {seq.batch, seq.max_len, schema_.dim});
}

Var EmbeddingBank::embed_target(Tape& tape, std::span<const std::int64_t> target, std::size_t b) const {
  if (b >= seq_.size()) throw IndexError("embed_target: behavior " + std::to_string(b) + " out of range");
  return gather_rows(tape.param(*seq_[b]), target);
}

TypeEmbedding EmbeddingBank::type_embeddings(Tape& tape, std::size_t task, std::size_t behavior) const {
  if (task >= schema_.n_tasks) throw IndexError("task " + std::to_string(task) + " out of range");
  if (behavior >= schema_.n_seqs) throw IndexError("behavior " + std::to_string(behavior) + " out of range");
  const std::int64_t t = static_cast<std::int64_t>(task);
  const std::int64_t b = static_cast<std::int64_t>(behavior);
  const std::size_t d = schema_.dim;
  return {reshape(gather_rows(tape.param(*task_), std::span<const std::int64_t>(&t, 1)), {d}),
          reshape(gather_rows(tape.param(*behavior_), std::span<const std::int64_t>(&b, 1)), {d})};
}

}  // namespace dtrn
