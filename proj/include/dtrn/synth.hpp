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
#include <optional>
#include <span>
#include <vector>

#include "dtrn/config.hpp"
#include "dtrn/data.hpp"

namespace dtrn {

/// Knobs of the synthetic multi-task, multi-behavior world.
///
/// Task t's score for user u and target v is
///   s_t = score_scale * <u * dir_t, v> + main_effect * (<u, dir_t> + <v, dir_t>)
///         + sum_b A[t][b] * count(v in history_b) + task_bias[t]
/// and y_t ~ Bernoulli(sigmoid(s_t)). Task directions have pairwise cosines C.
struct GeneratorConfig {
  std::size_t n_tasks = 4;
  std::size_t n_seqs = 3;
  std::size_t n_sparse = 3;
  std::size_t dim = 16;  // embedding width written to the schema
  std::size_t n_users = 2000;
  std::size_t n_items = 500;
  std::size_t latent_dim = 8;
  std::size_t bucket_vocab = 16;
  std::vector<std::vector<double>> task_behavior_weights;  // A, T x M; default zeros
  std::vector<std::vector<double>> task_conflict;          // C, T x T; default identity
  std::vector<std::vector<double>> behavior_task_mix;        // M x T; default random in [0, 1)
  std::vector<double> seq_length_means;                    // default 8 per behavior
  std::vector<std::size_t> max_len;                        // default max(1, 2 * mean)
  std::vector<double> task_bias;                           // default zeros
  double score_scale = 1.5;
  double main_effect = 0.0;
  double history_temperature = 1.0;
  double popularity_skew = 1.0;
  std::size_t n_instances = 50000;
  std::size_t n_test = 10000;
  std::size_t shard_size = 4096;
  std::uint64_t seed = 1;

  // Fills defaults sized by T and M, then checks shapes and ranges.
  void finalize();
  FeatureSchema schema() const;

  static GeneratorConfig from_config(const KeyValueConfig& kv);
};

struct LatentWorld {
  std::vector<std::vector<double>> user_factors;     // n_users x k
  std::vector<std::vector<double>> item_factors;     // n_items x k, row i is item id i + 1
  std::vector<std::vector<double>> task_directions;  // T x k, unit norm
  std::vector<std::vector<double>> behavior_directions;  // M x k, unit norm
  std::vector<double> item_popularity;               // log-weights, n_items
  std::vector<std::vector<std::int64_t>> user_buckets;  // n_users x (N - 2)

  // Depends on the seed and sizes only, never on A.
  static LatentWorld build(const GeneratorConfig& cfg);
};

// Rows of an n x k matrix whose Gram matrix equals C (ConfigError if C is not
// a valid correlation matrix or needs more than k dimensions).
std::vector<std::vector<double>> directions_from_gram(const std::vector<std::vector<double>>& C, std::size_t k,
                                                      std::uint64_t seed);

enum class Split { train, test };

struct GeneratedData {
  std::vector<Instance> instances;
  std::vector<std::vector<double>> probabilities;  // per instance, sigmoid(s_t)
};

GeneratedData generate(const GeneratorConfig& cfg, const LatentWorld& world, Split split);

// Writes train.jsonl, test.jsonl and schema.cfg into `dir`.
void generate_to_directory(const GeneratorConfig& cfg, const std::filesystem::path& dir);

/// Entry (t, b): mean over instances with y_t = 1 of the number of times the
/// target item occurs in sequence b; nullopt when task t has no positives.
using TargetStats = std::vector<std::vector<std::optional<double>>>;

TargetStats sequence_target_stats(std::span<const Instance> data, std::size_t tasks, std::size_t seqs);
// Header task,behavior,avg_count; absent entries are written as NA.
void write_target_stats(const std::filesystem::path& path, const TargetStats& stats);

}  // namespace dtrn
