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

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <iostream>

#include "dtrn/synth.hpp"
#include "dtrn/train.hpp"

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& tok : dtrn::split(text, ',')) {
    const std::string s = dtrn::trim(tok);
    if (s.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s[0] == '-') throw dtrn::ConfigError("invalid seed '" + s + "'");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw dtrn::ConfigError("no seeds given");
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-specific interest and representation refinement for multi-task recommendation"};
  app.require_subcommand(1);

  std::string config, out, schema_path, data, ckpt, report, suite, seeds, kind;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset (train.jsonl, test.jsonl, schema.cfg)");
  gen->add_option("--config", config, "generator key-value config")->required();
  gen->add_option("--out", out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  tr->add_option("--schema", schema_path, "feature schema")->required();
  tr->add_option("--data", data, "training data (JSON lines)")->required();
  tr->add_option("--config", config, "model and training key-value config")->required();
  tr->add_option("--out", out, "checkpoint path")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint (per-task AUC and LogLoss)");
  ev->add_option("--ckpt", ckpt, "checkpoint path")->required();
  ev->add_option("--data", data, "evaluation data")->required();
  ev->add_option("--report", report, "CSV report path")->required();

  auto* ab = app.add_subcommand("ablate", "Run an ablation suite over seeds");
  ab->add_option("--suite", suite, "suite key-value file")->required();
  ab->add_option("--seeds", seeds, "comma-separated seeds")->required();
  ab->add_option("--report", report, "CSV report path")->required();

  auto* st = app.add_subcommand("stats", "Average target occurrences per task and behavior sequence");
  st->add_option("--data", data, "dataset")->required();
  st->add_option("--out", out, "CSV path")->required();

  auto* ex = app.add_subcommand("export", "Export interest or bottom representations");
  ex->add_option("--ckpt", ckpt, "checkpoint path")->required();
  ex->add_option("--data", data, "dataset")->required();
  ex->add_option("--kind", kind, "interest or bottom")->required();
  ex->add_option("--out", out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      dtrn::generate_to_directory(dtrn::GeneratorConfig::from_config(dtrn::KeyValueConfig::load(config)), out);
    } else if (*tr) {
      const auto kv = dtrn::KeyValueConfig::load(config);
      std::set<std::string> known = dtrn::ModelConfig::keys();
      known.insert(dtrn::TrainConfig::keys().begin(), dtrn::TrainConfig::keys().end());
      kv.require_known(known);
      const auto schema = dtrn::FeatureSchema::load(schema_path);
      const auto train_cfg = dtrn::TrainConfig::from_config(kv);
      const auto rows = dtrn::read_dataset(data, schema);
      dtrn::DtrnModel model(schema, dtrn::ModelConfig::from_config(kv), train_cfg.seed);
      const auto result = dtrn::train(model, rows, train_cfg);
      dtrn::save_model(out, model, train_cfg);
      std::printf("trained %zu batches in %.2fs, final loss %.6f\n", result.loss_history.size(), result.wall_time,
                  result.loss_history.back());
    } else if (*ev) {
      auto loaded = dtrn::load_model(ckpt);
      const auto rows = dtrn::read_dataset(data, loaded.model->schema());
      auto metrics = dtrn::evaluate(*loaded.model, rows);
      metrics.seed = loaded.train.seed;
      metrics.config_hash = loaded.config_hash;
      dtrn::write_metrics_csv(report, metrics);
    } else if (*ab) {
      const std::filesystem::path suite_path(suite);
      const auto parsed = dtrn::AblationSuite::from_config(dtrn::KeyValueConfig::load(suite_path),
                                                           suite_path.parent_path());
      const auto seed_list = parse_seeds(seeds);
      const auto rows = dtrn::run_ablation(parsed, seed_list);
      const auto schema = dtrn::FeatureSchema::load(parsed.data_dir / "schema.cfg");
      dtrn::write_ablation_csv(report, rows, schema.n_tasks);
    } else if (*st) {
      const auto rows = dtrn::read_dataset(data);
      if (rows.empty()) throw dtrn::Error("dataset is empty: " + data);
      const auto stats = dtrn::sequence_target_stats(rows, rows[0].labels.size(), rows[0].seqs.size());
      dtrn::write_target_stats(out, stats);
    } else if (*ex) {
      const auto export_kind = dtrn::parse_export_kind(kind);
      auto loaded = dtrn::load_model(ckpt);
      const auto rows = dtrn::read_dataset(data, loaded.model->schema());
      dtrn::export_representations(*loaded.model, rows, export_kind, out);
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg) {
      if (c == '\n') c = ' ';
    }
    std::cerr << "error: " << msg << '\n';
    return 1;
  }
  return 0;
}
