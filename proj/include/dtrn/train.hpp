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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dtrn/model.hpp"
#include "dtrn/optim.hpp"

namespace dtrn {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 256;
  std::size_t epochs = 1;
  std::uint64_t seed = 1;

  void validate() const;
  static TrainConfig from_config(const KeyValueConfig& kv);
  void write(KeyValueConfig& kv) const;
  static const std::set<std::string>& keys();
};

struct TrainResult {
  std::vector<double> loss_history;  // one entry per mini-batch
  double wall_time = 0.0;            // seconds
};

// One seeded permutation of [0, n) per epoch.
std::vector<std::vector<std::size_t>> epoch_orders(std::size_t n, const TrainConfig& cfg);

// Seeded shuffle per epoch; forward, total loss, backward, Adam. A
// non-finite loss or activation aborts with NumericError naming the batch.
TrainResult train(DtrnModel& model, std::span<const Instance> data, const TrainConfig& cfg);

// probs[t][i] = sigmoid(o_t) for instance i; empty for removed tasks.
std::vector<std::vector<double>> predict(const DtrnModel& model, std::span<const Instance> data,
                                         std::size_t batch_size = 1024);

struct TaskMetrics {
  std::size_t task = 0;
  std::optional<double> auc;  // absent when the labels hold one class
  double logloss = 0.0;
};

struct MetricsReport {
  std::vector<TaskMetrics> tasks;  // active tasks only
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  double wall_time = 0.0;
};

MetricsReport evaluate(const DtrnModel& model, std::span<const Instance> data);
// Header task,auc,logloss,seed,config_hash,wall_time.
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);

// Full run description: schema, model and train keys.
KeyValueConfig run_config(const FeatureSchema& schema, const ModelConfig& model, const TrainConfig& train);

// Parameters go to `path`; schema, model and train keys to `path` + ".cfg".
void save_model(const std::filesystem::path& path, const DtrnModel& model, const TrainConfig& train);
struct LoadedModel {
  std::unique_ptr<DtrnModel> model;
  TrainConfig train;
  std::uint64_t config_hash = 0;
};
LoadedModel load_model(const std::filesystem::path& path);

enum class ExportKind { interest, bottom };
ExportKind parse_export_kind(std::string_view name);

// Rows instance_id,task,behavior,v0..v{w-1}; behavior is '-' for bottoms.
void export_representations(const DtrnModel& model, std::span<const Instance> data, ExportKind kind,
                            const std::filesystem::path& path, std::size_t batch_size = 1024);

// bottoms[t][i]: refined bottom vector of instance i for task t.
std::vector<std::vector<std::vector<double>>> bottom_representations(const DtrnModel& model,
                                                                     std::span<const Instance> data,
                                                                     std::size_t batch_size = 1024);

/// One trained configuration inside an ablation suite.
struct AblationVariant {
  Variant variant = Variant::dtrn;
  HeadKind head = HeadKind::share_bottom;
  InjectionSite site = InjectionSite::ln;
  std::vector<std::size_t> removed;

  std::string label() const;
};

/// Flat key-value suite:
///   data_dir=<dir with schema.cfg, train.jsonl, test.jsonl>
///   variants=baseline,+TIM,+TRM,DTRN
///   head_kinds=share_bottom,mmoe        (default share_bottom)
///   injection_sites=ln,qkv              (default ln)
///   remove_tasks=none;0;1               (default none)
/// plus any model or train key, applied to every variant.
struct AblationSuite {
  std::filesystem::path data_dir;
  std::vector<AblationVariant> variants;
  KeyValueConfig base;

  static AblationSuite from_config(const KeyValueConfig& kv, const std::filesystem::path& relative_to);
};

struct AblationRow {
  AblationVariant variant;
  // Per task over seeds; absent for removed tasks or undefined AUC.
  std::vector<std::optional<double>> auc_mean, auc_sd, logloss_mean, logloss_sd;
};

std::vector<AblationRow> run_ablation(const AblationSuite& suite, std::span<const std::uint64_t> seeds,
                                      const FeatureSchema& schema, std::span<const Instance> train_data,
                                      std::span<const Instance> test_data);
std::vector<AblationRow> run_ablation(const AblationSuite& suite, std::span<const std::uint64_t> seeds);
void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows, std::size_t tasks);

}  // namespace dtrn
