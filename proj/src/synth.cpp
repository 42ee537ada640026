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

#include "dtrn/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "dtrn/layers.hpp"

namespace dtrn {

namespace {

std::size_t get_size(const KeyValueConfig& kv, std::string_view key, std::size_t fallback) {
  const std::int64_t v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError("generator key '" + std::string(key) + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

void check_matrix(const std::vector<std::vector<double>>& m, std::size_t rows, std::size_t cols,
                  const std::string& name) {
  if (m.size() != rows) throw ConfigError(name + " needs " + std::to_string(rows) + " rows");
  for (const auto& r : m) {
    if (r.size() != cols) throw ConfigError(name + " needs " + std::to_string(cols) + " columns");
    for (double v : r) {
      if (!std::isfinite(v)) throw ConfigError(name + " has a non-finite entry");
    }
  }
}

std::vector<double> normalized(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
  return v;
}

}  // namespace

void GeneratorConfig::finalize() {
  const std::size_t T = n_tasks, M = n_seqs;
  if (T == 0 || M == 0 || n_sparse == 0 || dim == 0) throw ConfigError("generator needs n_tasks, n_seqs, n_sparse, dim >= 1");
  if (n_users == 0 || n_items == 0 || latent_dim == 0) throw ConfigError("generator needs n_users, n_items, latent_dim >= 1");
  if (n_sparse > 2 && bucket_vocab == 0) throw ConfigError("bucket_vocab must be >= 1");
  if (shard_size == 0) throw ConfigError("shard_size must be >= 1");
  if (task_behavior_weights.empty()) task_behavior_weights.assign(T, std::vector<double>(M, 0.0));
  if (task_conflict.empty()) {
    task_conflict.assign(T, std::vector<double>(T, 0.0));
    for (std::size_t t = 0; t < T; ++t) task_conflict[t][t] = 1.0;
  }
  if (seq_length_means.empty()) seq_length_means.assign(M, 8.0);
  if (task_bias.empty()) task_bias.assign(T, 0.0);
  check_matrix(task_behavior_weights, T, M, "task_behavior_weights");
  check_matrix(task_conflict, T, T, "task_conflict");
  if (!behavior_task_mix.empty()) check_matrix(behavior_task_mix, M, T, "behavior_task_mix");
  if (seq_length_means.size() != M) throw ConfigError("seq_length_means needs " + std::to_string(M) + " entries");
  for (double m : seq_length_means) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw ConfigError("sequence length means must be finite and >= 0");
  }
  if (max_len.empty()) {
    for (double m : seq_length_means) max_len.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(2 * m))));
  }
  if (max_len.size() != M) throw ConfigError("max_len needs " + std::to_string(M) + " entries");
  for (std::size_t l : max_len) {
    if (l == 0) throw ConfigError("max_len entries must be >= 1");
  }
  if (task_bias.size() != T) throw ConfigError("task_bias needs " + std::to_string(T) + " entries");
  for (double v : {score_scale, main_effect, history_temperature, popularity_skew}) {
    if (!std::isfinite(v)) throw ConfigError("generator scales must be finite");
  }
}

FeatureSchema GeneratorConfig::schema() const {
  FeatureSchema s;
  s.n_sparse = n_sparse;
  s.n_seqs = n_seqs;
  s.n_tasks = n_tasks;
  s.dim = dim;
  for (std::size_t i = 0; i < n_sparse; ++i) {
    s.sparse_vocab.push_back(i == 0 ? n_users : i == 1 ? n_items + 1 : bucket_vocab);
  }
  s.seq_vocab.assign(n_seqs, n_items + 1);
  s.max_len = max_len;
  return s;
}

GeneratorConfig GeneratorConfig::from_config(const KeyValueConfig& kv) {
  kv.require_known({"n_tasks", "n_seqs", "n_sparse", "dim", "n_users", "n_items", "latent_dim", "bucket_vocab",
                    "task_behavior_weights", "task_conflict", "behavior_task_mix", "seq_length_means", "max_len", "task_bias",
                    "score_scale", "main_effect", "history_temperature", "popularity_skew", "n_instances", "n_test",
                    "shard_size", "seed"});
  GeneratorConfig c;
  c.n_tasks = get_size(kv, "n_tasks", c.n_tasks);
  c.n_seqs = get_size(kv, "n_seqs", c.n_seqs);
  c.n_sparse = get_size(kv, "n_sparse", c.n_sparse);
  c.dim = get_size(kv, "dim", c.dim);
  c.n_users = get_size(kv, "n_users", c.n_users);
  c.n_items = get_size(kv, "n_items", c.n_items);
  c.latent_dim = get_size(kv, "latent_dim", c.latent_dim);
  c.bucket_vocab = get_size(kv, "bucket_vocab", c.bucket_vocab);
  if (kv.has("task_behavior_weights")) c.task_behavior_weights = kv.get_matrix("task_behavior_weights");
  if (kv.has("task_conflict")) c.task_conflict = kv.get_matrix("task_conflict");
  if (kv.has("behavior_task_mix")) c.behavior_task_mix = kv.get_matrix("behavior_task_mix");
  c.seq_length_means = kv.get_doubles("seq_length_means", {});
  for (double v : kv.get_doubles("max_len", {})) {
    if (v < 1 || v != std::floor(v)) throw ConfigError("max_len entries must be positive integers");
    c.max_len.push_back(static_cast<std::size_t>(v));
  }
  c.task_bias = kv.get_doubles("task_bias", {});
  c.score_scale = kv.get_double("score_scale", c.score_scale);
  c.main_effect = kv.get_double("main_effect", c.main_effect);
  c.history_temperature = kv.get_double("history_temperature", c.history_temperature);
  c.popularity_skew = kv.get_double("popularity_skew", c.popularity_skew);
  c.n_instances = get_size(kv, "n_instances", c.n_instances);
  c.n_test = get_size(kv, "n_test", c.n_test);
  c.shard_size = get_size(kv, "shard_size", c.shard_size);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
  c.finalize();
  return c;
}

std::vector<std::vector<double>> directions_from_gram(const std::vector<std::vector<double>>& C, std::size_t k,
                                                      std::uint64_t seed) {
  const std::size_t n = C.size();
  check_matrix(C, n, n, "task_conflict");
  Eigen::MatrixXd G(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(C[i][j] - C[j][i]) > 1e-12) throw ConfigError("task_conflict must be symmetric");
      G(i, j) = C[i][j];
    }
    if (std::abs(C[i][i] - 1.0) > 1e-12) throw ConfigError("task_conflict diagonal must be 1");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
  const Eigen::VectorXd lambda = eig.eigenvalues();
  if (lambda.minCoeff() < -1e-9) {
    throw ConfigError("task_conflict is not positive semidefinite (smallest eigenvalue " +
                      std::to_string(lambda.minCoeff()) + ")");
  }
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) rank += lambda(i) > 1e-9;
  if (rank > k) {
    throw ConfigError("task_conflict has rank " + std::to_string(rank) + " but latent_dim is " + std::to_string(k));
  }
  // L = V sqrt(Lambda), keeping the top `rank` components, then a random
  // rotation of R^k so directions are not axis-aligned.
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  std::size_t col = 0;
  for (Eigen::Index i = lambda.size() - 1; i >= 0 && col < rank; --i, ++col) {
    L.col(static_cast<Eigen::Index>(col)) = eig.eigenvectors().col(i) * std::sqrt(std::max(0.0, lambda(i)));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd R(k, k);
  for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = normal(rng);
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(R).householderQ();
  const Eigen::MatrixXd D = L * Q;
  std::vector<std::vector<double>> out(n, std::vector<double>(k));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) out[i][j] = D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return out;
}

LatentWorld LatentWorld::build(const GeneratorConfig& cfg) {
  const std::size_t k = cfg.latent_dim;
  LatentWorld w;
  auto gaussian_rows = [&](std::size_t rows, std::string_view stream) {
    std::mt19937_64 rng(parameter_stream_seed(cfg.seed, stream));
    std::normal_distribution<double> normal;
    std::vector<std::vector<double>> m(rows, std::vector<double>(k));
    for (auto& r : m) {
      for (double& v : r) v = normal(rng);
    }
    return m;
  };
  w.user_factors = gaussian_rows(cfg.n_users, "world.users");
  w.item_factors = gaussian_rows(cfg.n_items, "world.items");
  w.task_directions = directions_from_gram(cfg.task_conflict, k, parameter_stream_seed(cfg.seed, "world.rotation"));

  // Each behavior favors a mix of the task directions: the configured
  // weights, or random convex weights when none are given.
  std::mt19937_64 mix_rng(parameter_stream_seed(cfg.seed, "world.behaviors"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t b = 0; b < cfg.n_seqs; ++b) {
    std::vector<double> dir(k, 0.0);
    for (std::size_t t = 0; t < cfg.n_tasks; ++t) {
      const double a = cfg.behavior_task_mix.empty() ? unit(mix_rng) : cfg.behavior_task_mix[b][t];
      for (std::size_t j = 0; j < k; ++j) dir[j] += a * w.task_directions[t][j];
    }
    w.behavior_directions.push_back(normalized(std::move(dir)));
  }

  // Zipf-like popularity over a random item order.
  std::vector<std::size_t> order(cfg.n_items);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 pop_rng(parameter_stream_seed(cfg.seed, "world.popularity"));
  std::shuffle(order.begin(), order.end(), pop_rng);
  w.item_popularity.assign(cfg.n_items, 0.0);
  for (std::size_t r = 0; r < order.size(); ++r) {
    w.item_popularity[order[r]] = -cfg.popularity_skew * std::log(static_cast<double>(r + 1));
  }

  const std::size_t extra = cfg.n_sparse > 2 ? cfg.n_sparse - 2 : 0;
  std::mt19937_64 bucket_rng(parameter_stream_seed(cfg.seed, "world.buckets"));
  std::uniform_int_distribution<std::int64_t> bucket(0, static_cast<std::int64_t>(std::max<std::size_t>(cfg.bucket_vocab, 1)) - 1);
  w.user_buckets.assign(cfg.n_users, std::vector<std::int64_t>(extra));
  for (auto& r : w.user_buckets) {
    for (auto& v : r) v = bucket(bucket_rng);
  }
  return w;
}

GeneratedData generate(const GeneratorConfig& cfg, const LatentWorld& world, Split split) {
  const std::size_t T = cfg.n_tasks, M = cfg.n_seqs, k = cfg.latent_dim, n_items = cfg.n_items;
  const std::size_t n = split == Split::train ? cfg.n_instances : cfg.n_test;
  const std::string tag = split == Split::train ? "train" : "test";

  std::vector<double> target_weights(n_items);
  for (std::size_t i = 0; i < n_items; ++i) target_weights[i] = std::exp(world.item_popularity[i]);
  std::discrete_distribution<std::size_t> target_dist(target_weights.begin(), target_weights.end());

  GeneratedData out;
  out.instances.reserve(n);
  out.probabilities.reserve(n);
  std::vector<double> logits(n_items);
  for (std::size_t shard = 0; shard * cfg.shard_size < n; ++shard) {
    const std::string base = tag + ".shard." + std::to_string(shard);
    // Separate streams so that changing A or history knobs never shifts
    // the user/target or label draws.
    std::mt19937_64 who(parameter_stream_seed(cfg.seed, base + ".who"));
    std::mt19937_64 hist(parameter_stream_seed(cfg.seed, base + ".history"));
    std::mt19937_64 lab(parameter_stream_seed(cfg.seed, base + ".labels"));
    std::uniform_int_distribution<std::size_t> user_dist(0, cfg.n_users - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const std::size_t end = std::min(n, (shard + 1) * cfg.shard_size);
    for (std::size_t i = shard * cfg.shard_size; i < end; ++i) {
      const std::size_t user = user_dist(who);
      const std::size_t item = target_dist(who);
      const auto& u = world.user_factors[user];
      const auto& v = world.item_factors[item];

      Instance inst;
      inst.target = static_cast<std::int64_t>(item + 1);
      inst.sparse.push_back(static_cast<std::int64_t>(user));
      if (cfg.n_sparse > 1) inst.sparse.push_back(inst.target);
      for (std::int64_t bkt : world.user_buckets[user]) inst.sparse.push_back(bkt);

      std::vector<std::size_t> counts(M, 0);
      for (std::size_t b = 0; b < M; ++b) {
        std::poisson_distribution<std::size_t> len_dist(cfg.seq_length_means[b]);
        const std::size_t len = cfg.seq_length_means[b] > 0 ? std::min(len_dist(hist), cfg.max_len[b]) : 0;
        std::vector<std::int64_t> seq;
        if (len > 0) {
          const auto& w = world.behavior_directions[b];
          for (std::size_t j = 0; j < n_items; ++j) {
            double a = 0.0;
            for (std::size_t c = 0; c < k; ++c) a += u[c] * w[c] * world.item_factors[j][c];
            logits[j] = cfg.history_temperature * a + world.item_popularity[j];
          }
          const double mx = *std::max_element(logits.begin(), logits.end());
          for (double& l : logits) l = std::exp(l - mx);
          std::discrete_distribution<std::size_t> pick(logits.begin(), logits.end());
          for (std::size_t j = 0; j < len; ++j) {
            const std::size_t it = pick(hist);
            seq.push_back(static_cast<std::int64_t>(it + 1));
            counts[b] += it == item;
          }
        }
        inst.seqs.push_back(std::move(seq));
      }

      std::vector<double> probs(T);
      for (std::size_t t = 0; t < T; ++t) {
        double s = 0.0;
        for (std::size_t c = 0; c < k; ++c) s += u[c] * world.task_directions[t][c] * v[c];
        s *= cfg.score_scale;
        if (cfg.main_effect != 0.0) {
          double mu = 0.0, mv = 0.0;
          for (std::size_t c = 0; c < k; ++c) {
            mu += u[c] * world.task_directions[t][c];
            mv += v[c] * world.task_directions[t][c];
          }
          s += cfg.main_effect * (mu + mv);
        }
        for (std::size_t b = 0; b < M; ++b) s += cfg.task_behavior_weights[t][b] * static_cast<double>(counts[b]);
        s += cfg.task_bias[t];
        probs[t] = 1.0 / (1.0 + std::exp(-s));
        inst.labels.push_back(unit(lab) < probs[t] ? 1 : 0);
      }
      out.instances.push_back(std::move(inst));
      out.probabilities.push_back(std::move(probs));
    }
  }
  return out;
}

void generate_to_directory(const GeneratorConfig& cfg, const std::filesystem::path& dir) {
  GeneratorConfig c = cfg;
  c.finalize();
  std::filesystem::create_directories(dir);
  const LatentWorld world = LatentWorld::build(c);
  c.schema().save(dir / "schema.cfg");
  write_dataset(dir / "train.jsonl", generate(c, world, Split::train).instances);
  write_dataset(dir / "test.jsonl", generate(c, world, Split::test).instances);
}

TargetStats sequence_target_stats(std::span<const Instance> data, std::size_t tasks, std::size_t seqs) {
  std::vector<std::vector<double>> total(tasks, std::vector<double>(seqs, 0.0));
  std::vector<std::size_t> positives(tasks, 0);
  for (const Instance& inst : data) {
    if (inst.labels.size() != tasks || inst.seqs.size() != seqs) {
      throw DimensionError("instance layout does not match " + std::to_string(tasks) + " tasks and " +
                           std::to_string(seqs) + " sequences");
    }
    std::vector<std::size_t> count(seqs);
    for (std::size_t b = 0; b < seqs; ++b) {
      count[b] = static_cast<std::size_t>(std::count(inst.seqs[b].begin(), inst.seqs[b].end(), inst.target));
    }
    for (std::size_t t = 0; t < tasks; ++t) {
      if (inst.labels[t] != 1) continue;
      ++positives[t];
      for (std::size_t b = 0; b < seqs; ++b) total[t][b] += static_cast<double>(count[b]);
    }
  }
  TargetStats out(tasks, std::vector<std::optional<double>>(seqs));
  for (std::size_t t = 0; t < tasks; ++t) {
    if (positives[t] == 0) continue;
    for (std::size_t b = 0; b < seqs; ++b) out[t][b] = total[t][b] / static_cast<double>(positives[t]);
  }
  return out;
}

void write_target_stats(const std::filesystem::path& path, const TargetStats& stats) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write stats: " + path.string());
  os << "task,behavior,avg_count\n";
  os.precision(10);
  for (std::size_t t = 0; t < stats.size(); ++t) {
    for (std::size_t b = 0; b < stats[t].size(); ++b) {
      os << t << ',' << b << ',';
      if (stats[t][b]) {
        os << *stats[t][b];
      } else {
        os << "NA";
      }
      os << '\n';
    }
  }
  if (!os) throw Error("failed writing stats: " + path.string());
}

}  // namespace dtrn
