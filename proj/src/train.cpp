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

#include "dtrn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <tuple>

#include "dtrn/layers.hpp"
#include "dtrn/metrics.hpp"

namespace dtrn {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
}

const std::set<std::string>& TrainConfig::keys() {
  static const std::set<std::string> k{"lr", "batch_size", "epochs", "seed"};
  return k;
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
  TrainConfig c;
  c.lr = kv.get_double("lr", c.lr);
  const std::int64_t bs = kv.get_int("batch_size", static_cast<std::int64_t>(c.batch_size));
  const std::int64_t ep = kv.get_int("epochs", static_cast<std::int64_t>(c.epochs));
  if (bs < 1) throw ConfigError("batch_size must be >= 1");
  if (ep < 1) throw ConfigError("epochs must be >= 1");
  c.batch_size = static_cast<std::size_t>(bs);
  c.epochs = static_cast<std::size_t>(ep);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
  c.validate();
  return c;
}

void TrainConfig::write(KeyValueConfig& kv) const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", lr);
  kv.set("lr", buf);
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("epochs", std::to_string(epochs));
  kv.set("seed", std::to_string(seed));
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <typename Fn>
void for_each_batch(std::size_t n, std::size_t batch_size, Fn&& fn) {
  std::vector<std::size_t> rows;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    rows.resize(end - begin);
    std::iota(rows.begin(), rows.end(), begin);
    fn(begin, rows);
  }
}

}  // namespace

std::vector<std::vector<std::size_t>> epoch_orders(std::size_t n, const TrainConfig& cfg) {
  std::mt19937_64 rng(parameter_stream_seed(cfg.seed, "train.shuffle"));
  std::vector<std::vector<std::size_t>> out(cfg.epochs, std::vector<std::size_t>(n));
  for (auto& order : out) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
  }
  return out;
}

TrainResult train(DtrnModel& model, std::span<const Instance> data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ConfigError("training data is empty");
  for (const Instance& inst : data) validate_instance(inst, model.schema());
  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  AdamOptions opts;
  opts.lr = cfg.lr;
  std::size_t batch_index = 0;
  for (const auto& order : epoch_orders(data.size(), cfg)) {
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      try {
        const Batch batch = Batch::build(data, rows, model.schema());
        Tape tape;
        const ModelOutput out = model.forward(tape, batch);
        const Var loss = total_loss(out.logits, batch.labels);
        const double value = loss.value().item();
        if (!std::isfinite(value)) throw NumericError("loss is " + std::to_string(value));
        model.parameters().zero_grads();
        tape.backward(loss);
        adam_step(model.parameters(), opts);
        result.loss_history.push_back(value);
      } catch (const NumericError& e) {
        throw NumericError("training aborted at batch " + std::to_string(batch_index) + ": " + e.what());
      }
    }
  }
  result.wall_time = seconds_since(start);
  return result;
}

std::vector<std::vector<double>> predict(const DtrnModel& model, std::span<const Instance> data,
                                         std::size_t batch_size) {
  const std::size_t T = model.schema().n_tasks;
  std::vector<std::vector<double>> probs(T);
  for (std::size_t t = 0; t < T; ++t) {
    if (model.task_active(t)) probs[t].reserve(data.size());
  }
  for_each_batch(data.size(), batch_size, [&](std::size_t, std::span<const std::size_t> rows) {
    const Batch batch = Batch::build(data, rows, model.schema());
    Tape tape(/*record_gradients=*/false);
    const ModelOutput out = model.forward(tape, batch);
    for (std::size_t t = 0; t < T; ++t) {
      if (!out.logits.o[t].valid()) continue;
      for (Scalar o : out.logits.o[t].value().data()) probs[t].push_back(stable_sigmoid(o));
    }
  });
  return probs;
}

MetricsReport evaluate(const DtrnModel& model, std::span<const Instance> data) {
  if (data.empty()) throw ConfigError("evaluation data is empty");
  for (const Instance& inst : data) validate_instance(inst, model.schema());
  const auto start = std::chrono::steady_clock::now();
  const auto probs = predict(model, data);
  MetricsReport report;
  std::vector<int> labels(data.size());
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (!model.task_active(t)) continue;
    for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data[i].labels[t];
    TaskMetrics m;
    m.task = t;
    const bool both = std::any_of(labels.begin(), labels.end(), [](int y) { return y == 1; }) &&
                      std::any_of(labels.begin(), labels.end(), [](int y) { return y == 0; });
    if (both) m.auc = auc(probs[t], labels);
    m.logloss = logloss(probs[t], labels);
    report.tasks.push_back(m);
  }
  report.wall_time = seconds_since(start);
  return report;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write report: " + path.string());
  os.precision(10);
  os << "task,auc,logloss,seed,config_hash,wall_time\n";
  for (const TaskMetrics& m : report.tasks) {
    os << m.task << ',';
    if (m.auc) {
      os << *m.auc;
    } else {
      os << "NA";
    }
    os << ',' << m.logloss << ',' << report.seed << ',' << report.config_hash << ',' << report.wall_time << '\n';
  }
  if (!os) throw Error("failed writing report: " + path.string());
}

KeyValueConfig run_config(const FeatureSchema& schema, const ModelConfig& model, const TrainConfig& train) {
  KeyValueConfig kv = schema.to_config();
  model.write(kv);
  train.write(kv);
  return kv;
}

void save_model(const std::filesystem::path& path, const DtrnModel& model, const TrainConfig& train) {
  save_checkpoint(model.parameters(), path);
  const std::filesystem::path side = path.string() + ".cfg";
  std::ofstream os(side);
  if (!os) throw Error("cannot write model config: " + side.string());
  os << run_config(model.schema(), model.config(), train).to_text();
  if (!os) throw Error("failed writing model config: " + side.string());
}

LoadedModel load_model(const std::filesystem::path& path) {
  const std::filesystem::path side = path.string() + ".cfg";
  if (!std::filesystem::exists(side)) throw Error("missing model config next to checkpoint: " + side.string());
  const KeyValueConfig kv = KeyValueConfig::load(side);
  LoadedModel out;
  out.train = TrainConfig::from_config(kv);
  out.config_hash = kv.hash();
  out.model = std::make_unique<DtrnModel>(FeatureSchema::from_config(kv), ModelConfig::from_config(kv),
                                          out.train.seed);
  load_checkpoint(out.model->parameters(), path);
  return out;
}

ExportKind parse_export_kind(std::string_view name) {
  if (name == "interest") return ExportKind::interest;
  if (name == "bottom") return ExportKind::bottom;
  throw ConfigError("unknown export kind '" + std::string(name) + "' (expected interest or bottom)");
}

void export_representations(const DtrnModel& model, std::span<const Instance> data, ExportKind kind,
                            const std::filesystem::path& path, std::size_t batch_size) {
  const FeatureSchema& schema = model.schema();
  for (const Instance& inst : data) validate_instance(inst, schema);
  std::ofstream os(path);
  if (!os) throw Error("cannot write export: " + path.string());
  os.precision(9);
  const std::size_t width = kind == ExportKind::interest ? schema.dim : schema.bottom_width();
  os << "instance_id,task,behavior";
  for (std::size_t j = 0; j < width; ++j) os << ",v" << j;
  os << '\n';
  auto write_row = [&](std::size_t id, std::size_t t, const std::string& b, const Tensor& v, std::size_t r) {
    os << id << ',' << t << ',' << b;
    for (std::size_t j = 0; j < width; ++j) os << ',' << v[r * width + j];
    os << '\n';
  };
  for_each_batch(data.size(), batch_size, [&](std::size_t begin, std::span<const std::size_t> rows) {
    const Batch batch = Batch::build(data, rows, schema);
    Tape tape(/*record_gradients=*/false);
    const ModelOutput out = model.forward(tape, batch);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t t = 0; t < schema.n_tasks; ++t) {
        if (!model.task_active(t)) continue;
        if (kind == ExportKind::bottom) {
          write_row(begin + r, t, "-", out.bottoms[t].refined.value(), r);
          continue;
        }
        for (std::size_t b = 0; b < schema.n_seqs; ++b) {
          write_row(begin + r, t, std::to_string(b), out.interests[t][b].value(), r);
        }
      }
    }
  });
  if (!os) throw Error("failed writing export: " + path.string());
}

std::vector<std::vector<std::vector<double>>> bottom_representations(const DtrnModel& model,
                                                                     std::span<const Instance> data,
                                                                     std::size_t batch_size) {
  const FeatureSchema& schema = model.schema();
  const std::size_t D = schema.bottom_width();
  std::vector<std::vector<std::vector<double>>> out(schema.n_tasks);
  for_each_batch(data.size(), batch_size, [&](std::size_t, std::span<const std::size_t> rows) {
    const Batch batch = Batch::build(data, rows, schema);
    Tape tape(/*record_gradients=*/false);
    const ModelOutput res = model.forward(tape, batch);
    for (std::size_t t = 0; t < schema.n_tasks; ++t) {
      if (!model.task_active(t)) continue;
      const Tensor& v = res.bottoms[t].refined.value();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        out[t].emplace_back(v.data().begin() + static_cast<std::ptrdiff_t>(r * D),
                            v.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * D));
      }
    }
  });
  return out;
}

std::string AblationVariant::label() const {
  std::string s(to_string(variant));
  s += "/" + std::string(to_string(head)) + "/" + std::string(to_string(site));
  if (!removed.empty()) {
    s += "/-";
    for (std::size_t i = 0; i < removed.size(); ++i) s += (i ? "," : "") + std::to_string(removed[i]);
  }
  return s;
}

AblationSuite AblationSuite::from_config(const KeyValueConfig& kv, const std::filesystem::path& relative_to) {
  std::set<std::string> known{"data_dir", "variants", "head_kinds", "injection_sites", "remove_tasks"};
  known.insert(ModelConfig::keys().begin(), ModelConfig::keys().end());
  known.insert(TrainConfig::keys().begin(), TrainConfig::keys().end());
  kv.require_known(known);
  AblationSuite suite;
  suite.data_dir = kv.get_string("data_dir");
  if (suite.data_dir.is_relative()) suite.data_dir = relative_to / suite.data_dir;

  auto list = [&](std::string_view key, std::string fallback, char sep) {
    std::vector<std::string> out;
    for (const std::string& s : split(kv.get_string(key, std::move(fallback)), sep)) {
      if (!trim(s).empty()) out.push_back(trim(s));
    }
    return out;
  };
  const auto variants = list("variants", "", ',');
  if (variants.empty()) throw ConfigError("suite lists no variants");
  std::vector<std::vector<std::size_t>> masks;
  for (const std::string& m : list("remove_tasks", "none", ';')) {
    std::vector<std::size_t> removed;
    if (m != "none") {
      KeyValueConfig tmp;
      tmp.set("remove_tasks", m);
      removed = ModelConfig::from_config(tmp).remove_tasks;
    }
    masks.push_back(std::move(removed));
  }
  for (const std::string& v : variants) {
    for (const std::string& h : list("head_kinds", "share_bottom", ',')) {
      for (const std::string& site : list("injection_sites", "ln", ',')) {
        for (const auto& removed : masks) {
          suite.variants.push_back({parse_variant(v), parse_head_kind(h), parse_injection_site(site), removed});
        }
      }
    }
  }
  for (const auto& [k, v] : kv.entries()) {
    if (!known.count(k) || k == "data_dir" || k == "variants" || k == "head_kinds" || k == "injection_sites" ||
        k == "remove_tasks") {
      continue;
    }
    suite.base.set(k, v);
  }
  if (suite.base.has("variant") || suite.base.has("use_tim") || suite.base.has("use_trm") ||
      suite.base.has("head") || suite.base.has("injection_site")) {
    throw ConfigError("suite must choose variants through variants/head_kinds/injection_sites lists");
  }
  return suite;
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

}  // namespace

std::vector<AblationRow> run_ablation(const AblationSuite& suite, std::span<const std::uint64_t> seeds,
                                      const FeatureSchema& schema, std::span<const Instance> train_data,
                                      std::span<const Instance> test_data) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  const std::size_t T = schema.n_tasks;
  std::vector<AblationRow> rows;
  for (const AblationVariant& v : suite.variants) {
    ModelConfig mc = ModelConfig::from_config(suite.base);
    mc.set_variant(v.variant);
    mc.head = v.head;
    mc.injection_site = v.site;
    mc.remove_tasks = v.removed;
    TrainConfig tc = TrainConfig::from_config(suite.base);
    std::vector<std::vector<double>> aucs(T), losses(T);
    for (std::uint64_t seed : seeds) {
      tc.seed = seed;
      DtrnModel model(schema, mc, seed);
      train(model, train_data, tc);
      for (const TaskMetrics& m : evaluate(model, test_data).tasks) {
        if (m.auc) aucs[m.task].push_back(*m.auc);
        losses[m.task].push_back(m.logloss);
      }
    }
    AblationRow row;
    row.variant = v;
    row.auc_mean.resize(T);
    row.auc_sd.resize(T);
    row.logloss_mean.resize(T);
    row.logloss_sd.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      if (aucs[t].size() == seeds.size()) std::tie(row.auc_mean[t], row.auc_sd[t]) = mean_sd(aucs[t]);
      if (!losses[t].empty()) std::tie(row.logloss_mean[t], row.logloss_sd[t]) = mean_sd(losses[t]);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AblationRow> run_ablation(const AblationSuite& suite, std::span<const std::uint64_t> seeds) {
  const FeatureSchema schema = FeatureSchema::load(suite.data_dir / "schema.cfg");
  const auto train_data = read_dataset(suite.data_dir / "train.jsonl", schema);
  const auto test_data = read_dataset(suite.data_dir / "test.jsonl", schema);
  return run_ablation(suite, seeds, schema, train_data, test_data);
}

void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows, std::size_t tasks) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write report: " + path.string());
  os.precision(10);
  os << "variant,head,injection_site,removed";
  for (std::size_t t = 0; t < tasks; ++t) {
    os << ",auc_mean_" << t << ",auc_sd_" << t << ",logloss_mean_" << t << ",logloss_sd_" << t;
  }
  os << '\n';
  auto cell = [&](const std::optional<double>& v) {
    os << ',';
    if (v) {
      os << *v;
    } else {
      os << "NA";
    }
  };
  for (const AblationRow& r : rows) {
    os << to_string(r.variant.variant) << ',' << to_string(r.variant.head) << ',' << to_string(r.variant.site) << ',';
    if (r.variant.removed.empty()) os << "none";
    for (std::size_t i = 0; i < r.variant.removed.size(); ++i) os << (i ? ";" : "") << r.variant.removed[i];
    for (std::size_t t = 0; t < tasks; ++t) {
      cell(r.auc_mean.at(t));
      cell(r.auc_sd.at(t));
      cell(r.logloss_mean.at(t));
      cell(r.logloss_sd.at(t));
    }
    os << '\n';
  }
  if (!os) throw Error("failed writing report: " + path.string());
}

}  // namespace dtrn
