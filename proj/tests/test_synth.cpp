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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>

#include "dtrn/synth.hpp"
#include "test_support.hpp"

using namespace dtrn;

namespace {

GeneratorConfig small_config(std::uint64_t seed, std::size_t n) {
  GeneratorConfig g;
  g.n_tasks = 3;
  g.n_seqs = 2;
  g.n_sparse = 3;
  g.dim = 8;
  g.n_users = 300;
  g.n_items = 100;
  g.latent_dim = 4;
  g.seq_length_means = {5, 2};
  g.n_instances = n;
  g.n_test = n / 2;
  g.seed = seed;
  return g;
}

GeneratedData make(GeneratorConfig g, Split split = Split::train) {
  g.finalize();
  return generate(g, LatentWorld::build(g), split);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

double correlation(const std::vector<Instance>& data, std::size_t a, std::size_t b) {
  double ma = 0, mb = 0;
  for (const auto& i : data) {
    ma += i.labels[a];
    mb += i.labels[b];
  }
  ma /= data.size();
  mb /= data.size();
  double cov = 0, va = 0, vb = 0;
  for (const auto& i : data) {
    cov += (i.labels[a] - ma) * (i.labels[b] - mb);
    va += (i.labels[a] - ma) * (i.labels[a] - ma);
    vb += (i.labels[b] - mb) * (i.labels[b] - mb);
  }
  return cov / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("defaults and validation") {
  GeneratorConfig g = small_config(1, 10);
  g.finalize();
  CHECK(g.task_conflict.size() == 3);
  CHECK(g.task_behavior_weights.size() == 3);
  CHECK(g.task_behavior_weights[0].size() == 2);
  CHECK(g.max_len == std::vector<std::size_t>{10, 4});
  const FeatureSchema s = g.schema();
  CHECK(s.n_tasks == 3);
  CHECK(s.sparse_vocab[0] == 300);
  CHECK(s.sparse_vocab[1] == 101);
  CHECK(s.seq_vocab == std::vector<std::size_t>{101, 101});

  GeneratorConfig bad = small_config(1, 10);
  bad.seq_length_means = {1, -1};
  CHECK_THROWS_AS(bad.finalize(), ConfigError);
  bad = small_config(1, 10);
  bad.task_behavior_weights = {{0, 0}, {0, std::nan("")}, {0, 0}};
  CHECK_THROWS_AS(bad.finalize(), ConfigError);
  bad = small_config(1, 10);
  bad.task_conflict = {{1, 0.9, 0.9}, {0.9, 1, -0.9}, {0.9, -0.9, 1}};
  bad.finalize();
  CHECK_THROWS_AS(LatentWorld::build(bad), ConfigError);

  CHECK_THROWS_AS(GeneratorConfig::from_config(KeyValueConfig::parse("n_tasks=2\nnonsense=1")), ConfigError);
}

TEST_CASE("task directions reach the requested cosines") {
  const std::vector<std::vector<double>> C{{1, -0.4, 0.2, 0}, {-0.4, 1, 0.1, 0.3}, {0.2, 0.1, 1, -0.5}, {0, 0.3, -0.5, 1}};
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto dirs = directions_from_gram(C, 6, seed);
    REQUIRE(dirs.size() == 4);
    for (std::size_t a = 0; a < 4; ++a) {
      CHECK(dirs[a].size() == 6);
      for (std::size_t b = 0; b < 4; ++b) {
        double dot = 0;
        for (std::size_t k = 0; k < 6; ++k) dot += dirs[a][k] * dirs[b][k];
        CHECK(std::abs(dot - C[a][b]) <= 1e-6);
      }
    }
  }
  GeneratorConfig g = small_config(4, 10);
  g.task_conflict = {{1, -0.6, 0}, {-0.6, 1, 0.2}, {0, 0.2, 1}};
  g.finalize();
  const LatentWorld w = LatentWorld::build(g);
  double dot = 0;
  for (std::size_t k = 0; k < 4; ++k) dot += w.task_directions[0][k] * w.task_directions[1][k];
  CHECK(std::abs(dot + 0.6) <= 1e-6);
}

TEST_CASE("infeasible gram matrices are rejected") {
  CHECK_THROWS_AS(directions_from_gram({{1, 0.9, 0.9}, {0.9, 1, -0.9}, {0.9, -0.9, 1}}, 3, 1), ConfigError);
  CHECK_THROWS_AS(directions_from_gram({{1, 0.5}, {0.4, 1}}, 2, 1), ConfigError);
  CHECK_THROWS_AS(directions_from_gram({{2, 0}, {0, 1}}, 2, 1), ConfigError);
  CHECK_THROWS_AS(directions_from_gram({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, 2, 1), ConfigError);
  CHECK_NOTHROW(directions_from_gram({{1, 1}, {1, 1}}, 1, 1));
}

TEST_CASE("independent tasks have uncorrelated labels") {
  GeneratorConfig g = small_config(5, 50000);
  g.seq_length_means = {0, 0};
  g.finalize();
  const auto data = make(g).instances;
  REQUIRE(data.size() == 50000);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = a + 1; b < 3; ++b) {
      const double rho = correlation(data, a, b);
      MESSAGE("rho(", a, ",", b, ") = ", rho);
      CHECK(std::abs(rho) < 0.05);
    }
  }
}

TEST_CASE("without history weights labels ignore the histories") {
  GeneratorConfig a = small_config(6, 3000);
  GeneratorConfig b = a;
  b.seq_length_means = {1, 9};
  b.history_temperature = 3.0;
  const auto da = make(a).instances;
  const auto db = make(b).instances;
  for (std::size_t i = 0; i < da.size(); ++i) {
    REQUIRE(da[i].labels == db[i].labels);
    REQUIRE(da[i].target == db[i].target);
  }
  bool histories_differ = false;
  for (std::size_t i = 0; i < da.size(); ++i) histories_differ |= da[i].seqs != db[i].seqs;
  CHECK(histories_differ);
}

TEST_CASE("generation is deterministic") {
  const auto d1 = dtrn::testing::scratch_dir("gen1");
  const auto d2 = dtrn::testing::scratch_dir("gen2");
  GeneratorConfig g = small_config(7, 700);
  g.shard_size = 256;
  generate_to_directory(g, d1);
  generate_to_directory(g, d2);
  for (const char* f : {"train.jsonl", "test.jsonl", "schema.cfg"}) {
    INFO(f);
    CHECK(!slurp(d1 / f).empty());
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }
  g.seed = 8;
  const auto d3 = dtrn::testing::scratch_dir("gen3");
  generate_to_directory(g, d3);
  CHECK(slurp(d1 / "train.jsonl") != slurp(d3 / "train.jsonl"));
  CHECK(slurp(d1 / "train.jsonl") != slurp(d1 / "test.jsonl"));
}

TEST_CASE("generated files round trip and respect the schema") {
  const auto dir = dtrn::testing::scratch_dir("roundtrip");
  GeneratorConfig g = small_config(9, 400);
  generate_to_directory(g, dir);
  g.finalize();
  const FeatureSchema schema = FeatureSchema::load(dir / "schema.cfg");
  CHECK(schema == g.schema());
  const auto train = read_dataset(dir / "train.jsonl", schema);
  CHECK(train == make(g).instances);
  CHECK(read_dataset(dir / "test.jsonl", schema) == make(g, Split::test).instances);
  write_dataset(dir / "again.jsonl", train);
  CHECK(read_dataset(dir / "again.jsonl") == train);
}

TEST_CASE("positive rates follow the score distribution") {
  GeneratorConfig g = small_config(10, 50000);
  g.task_bias = {0.0, -2.0, -4.0};
  g.task_behavior_weights = {{0.5, 0}, {0, 0.5}, {0.3, 0.3}};
  g.main_effect = 0.5;
  g.finalize();
  const GeneratedData d = make(g);
  for (std::size_t t = 0; t < 3; ++t) {
    double implied = 0, observed = 0;
    for (std::size_t i = 0; i < d.instances.size(); ++i) {
      implied += d.probabilities[i][t];
      observed += d.instances[i].labels[t];
    }
    MESSAGE("task ", t, ": implied ", implied / 50000, " observed ", observed / 50000);
    CHECK(observed >= 0.8 * implied);
    CHECK(observed <= 1.2 * implied);
  }
}

TEST_CASE("target stats examples") {
  std::vector<Instance> data{{{0}, {{3, 5}, {3}}, {1, 0}, 3}, {{0}, {{1, 4}, {4, 2}}, {1, 1}, 4}};
  auto s = sequence_target_stats(data, 2, 2);
  CHECK(s[0][0] == 1.0);
  CHECK(s[0][1] == 1.0);
  CHECK(s[1][0] == 1.0);
  CHECK(s[1][1] == 1.0);

  for (auto& i : data) i.seqs = {{}, {}};
  s = sequence_target_stats(data, 2, 2);
  CHECK(s[0][0] == 0.0);
  CHECK(s[1][1] == 0.0);

  for (auto& i : data) i.labels = {0, 1};
  s = sequence_target_stats(data, 2, 2);
  CHECK_FALSE(s[0][0].has_value());
  CHECK(s[1][0].has_value());

  const auto path = dtrn::testing::scratch_dir("stats") / "stats.csv";
  write_target_stats(path, s);
  CHECK(slurp(path) == "task,behavior,avg_count\n0,0,NA\n0,1,NA\n1,0,0\n1,1,0\n");
}

TEST_CASE("target stats match a brute-force count") {
  const FeatureSchema schema = dtrn::testing::toy_schema(1, 3, 3, 4, 6, 5);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto data = dtrn::testing::random_instances(schema, 100, 100 + seed);
    const auto stats = sequence_target_stats(data, 3, 3);
    for (std::size_t t = 0; t < 3; ++t) {
      for (std::size_t b = 0; b < 3; ++b) {
        long hits = 0, positives = 0;
        for (const auto& inst : data) {
          if (inst.labels[t] != 1) continue;
          ++positives;
          for (auto id : inst.seqs[b]) hits += id == inst.target ? 1 : 0;
        }
        if (positives == 0) {
          CHECK_FALSE(stats[t][b].has_value());
        } else {
          REQUIRE(stats[t][b].has_value());
          CHECK(*stats[t][b] == static_cast<double>(hits) / static_cast<double>(positives));
        }
      }
    }
  }
}

TEST_CASE("target stats grow with the history weight") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    double last = -1.0;
    for (double level : {0.0, 1.0, 2.0}) {
      GeneratorConfig g = small_config(seed, 5000);
      g.task_behavior_weights = {{level, 0}, {0, 0}, {0, 0}};
      g.task_bias = {-2, 0, 0};
      g.finalize();
      const auto stats = sequence_target_stats(make(g).instances, 3, 2);
      REQUIRE(stats[0][0].has_value());
      MESSAGE("seed ", seed, " A=", level, ": ", *stats[0][0]);
      CHECK(*stats[0][0] >= last);
      last = *stats[0][0];
    }
  }
}
