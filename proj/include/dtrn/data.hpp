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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtrn/config.hpp"
#include "dtrn/tensor.hpp"

namespace dtrn {

/// Feature layout shared by a dataset and the models trained on it.
///
/// Sequence vocabularies reserve id 0 as padding; real item ids start at 1.
/// The target item is embedded with each sequence's table, so it must be a
/// valid non-pad id in every sequence vocabulary.
struct FeatureSchema {
  std::size_t n_sparse = 0;
  std::size_t n_seqs = 0;
  std::size_t n_tasks = 0;
  std::size_t dim = 0;
  std::vector<std::size_t> sparse_vocab;
  std::vector<std::size_t> seq_vocab;
  std::vector<std::size_t> max_len;

  void validate() const;
  // Width of a task's raw bottom representation: (N + M) * d.
  std::size_t bottom_width() const noexcept { return (n_sparse + n_seqs) * dim; }

  // Reads the schema keys and ignores any others; `load` rejects unknown keys.
  static FeatureSchema from_config(const KeyValueConfig& cfg);
  static FeatureSchema load(const std::filesystem::path& path);
  KeyValueConfig to_config() const;
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

struct Instance {
  std::vector<std::int64_t> sparse;
  std::vector<std::vector<std::int64_t>> seqs;
  std::vector<int> labels;
  std::int64_t target = 0;

  friend bool operator==(const Instance&, const Instance&) = default;
};

void validate_instance(const Instance& inst, const FeatureSchema& schema);

// One JSON object per line: {"sparse":[...],"seqs":[[...],...],"labels":[...],"target":n}
std::string instance_to_json(const Instance& inst);
Instance instance_from_json(std::string_view line);
void write_dataset(const std::filesystem::path& path, std::span<const Instance> data);
std::vector<Instance> read_dataset(const std::filesystem::path& path);
// Also checks every instance against the schema.
std::vector<Instance> read_dataset(const std::filesystem::path& path, const FeatureSchema& schema);

}  // namespace dtrn
