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

#include "dtrn/embedding.hpp"
#include "dtrn/model.hpp"
#include "dtrn/transformer.hpp"
#include "test_support.hpp"

using namespace dtrn;
using dtrn::testing::random_instances;
using dtrn::testing::toy_schema;

namespace {

SequenceBatch batch_of(const std::vector<std::vector<std::int64_t>>& lists, std::size_t max_len) {
  std::vector<const std::vector<std::int64_t>*> ptrs;
  for (const auto& l : lists) ptrs.push_back(&l);
  return SequenceBatch::from_lists(ptrs, max_len);
}

}  // namespace

TEST_CASE("schema validation") {
  FeatureSchema s = toy_schema(2, 2, 3, 4);
  CHECK_NOTHROW(s.validate());
  FeatureSchema bad = s;
  bad.dim = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.n_tasks = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.max_len[1] = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.sparse_vocab.pop_back();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("schema file round trip and unknown keys") {
  const auto dir = dtrn::testing::scratch_dir("schema");
  const FeatureSchema s = toy_schema(3, 2, 2, 8, 6, 11);
  s.save(dir / "schema.cfg");
  CHECK(FeatureSchema::load(dir / "schema.cfg") == s);

  std::ofstream(dir / "schema.cfg", std::ios::app) << "colour=blue\n";
  CHECK_THROWS_AS(FeatureSchema::load(dir / "schema.cfg"), ConfigError);
}

TEST_CASE("sequence batch padding contract") {
  const SequenceBatch sb = batch_of({{4}, {}, {1, 2, 3}, {1, 2, 3, 4, 5, 6}}, 4);
  CHECK(sb.batch == 4);
  CHECK(sb.max_len == 4);
  CHECK(sb.lengths == std::vector<std::size_t>{1, 0, 3, 4});
  const std::vector<std::int64_t> ids{4, 0, 0, 0, 0, 0, 0, 0, 1, 2, 3, 0, 3, 4, 5, 6};
  CHECK(sb.ids == ids);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(sb.mask[r * 4 + j] == (j < sb.lengths[r]));
  }
  CHECK(sb.any_nonempty());
  CHECK(sb.nonempty_rows() == std::vector<bool>{true, false, true, true});
  CHECK_FALSE(batch_of({{}, {}}, 3).any_nonempty());
}

TEST_CASE("embed_sparse looks up table rows") {
  const FeatureSchema s = toy_schema(2, 1, 1, 3, 4, 5);
  ParameterStore store;
  const EmbeddingBank bank(s, store, 3);
  Tape tape;
  const std::vector<std::vector<std::int64_t>> ids{{0, 4, 4}, {2, 0, 2}};
  const auto embs = bank.embed_sparse(tape, ids);
  REQUIRE(embs.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(embs[i].shape() == Shape{3, 3});
    const Tensor& table = bank.sparse_table(i).value;
    // One-hot product oracle.
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 3; ++c) {
        double v = 0.0;
        for (std::size_t k = 0; k < 5; ++k) v += (static_cast<std::size_t>(ids[i][r]) == k ? 1.0 : 0.0) * table.at(k, c);
        CHECK(embs[i].value().at(r, c) == v);
      }
    }
  }
  // id 0 is row 0; identical ids give identical rows.
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(embs[0].value().at(0, c) == bank.sparse_table(0).value.at(0, c));
    CHECK(embs[0].value().at(1, c) == embs[0].value().at(2, c));
  }
  const std::vector<std::vector<std::int64_t>> bad{{0}, {5}};
  CHECK_THROWS_AS(bank.embed_sparse(tape, bad), IndexError);
}

TEST_CASE("embedding initialization range") {
  const FeatureSchema s = toy_schema(1, 1, 2, 16, 4, 50);
  ParameterStore store;
  const EmbeddingBank bank(s, store, 3);
  const double bound = 1.0 / std::sqrt(16.0);
  for (const auto& p : store) {
    for (double v : p.value.data()) CHECK(std::abs(v) <= bound);
  }
  CHECK(bank.task_table().value.shape() == Shape{2, 16});
  CHECK(bank.behavior_table().value.shape() == Shape{1, 16});
  CHECK(bank.sequence_table(0).value.shape() == Shape{50, 16});
}

TEST_CASE("embed_sequence padding and permutation") {
  const FeatureSchema s = toy_schema(1, 1, 1, 3, 4, 6);
  ParameterStore store;
  const EmbeddingBank bank(s, store, 5);
  const Tensor& table = bank.sequence_table(0).value;
  Tape tape;
  const SequenceBatch sb = batch_of({{3}, {2, 5}, {5, 2}}, 4);
  const Tensor e = bank.embed_sequence(tape, sb, 0).value();
  CHECK(e.shape() == Shape{3, 4, 3});
  auto row = [&](std::size_t r, std::size_t j, std::size_t c) { return e[(r * 4 + j) * 3 + c]; };
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(row(0, 0, c) == table.at(3, c));
    for (std::size_t j = 1; j < 4; ++j) CHECK(row(0, j, c) == table.at(0, c));
    CHECK(row(1, 0, c) == row(2, 1, c));
    CHECK(row(1, 1, c) == row(2, 0, c));
  }
  CHECK_FALSE(sb.mask[1]);
  CHECK_THROWS_AS(bank.embed_sequence(tape, batch_of({{6}}, 4), 0), IndexError);
}

TEST_CASE("type embeddings") {
  const FeatureSchema s = toy_schema(1, 2, 3, 4);
  ParameterStore store;
  const EmbeddingBank bank(s, store, 5);
  Tape tape;
  const TypeEmbedding t0 = bank.type_embeddings(tape, 0, 1);
  const TypeEmbedding t1 = bank.type_embeddings(tape, 1, 1);
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(t0.task.value()[c] == bank.task_table().value.at(0, c));
    CHECK(t0.behavior.value()[c] == bank.behavior_table().value.at(1, c));
  }
  CHECK(t0.task.value() != t1.task.value());
  CHECK_THROWS_AS(bank.type_embeddings(tape, 3, 0), IndexError);
  CHECK_THROWS_AS(bank.type_embeddings(tape, 0, 2), IndexError);
}

TEST_CASE("type embedding gradient reaches exactly one row") {
  const FeatureSchema s = toy_schema(1, 2, 3, 4);
  ParameterStore store;
  const EmbeddingBank bank(s, store, 5);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t b = 0; b < 2; ++b) {
      store.zero_grads();
      Tape tape;
      const TypeEmbedding te = bank.type_embeddings(tape, t, b);
      tape.backward(dtrn::testing::probe_loss(concat_last(std::vector<Var>{te.task, te.behavior})));
      const Tensor& gt = bank.task_table().grad;
      const Tensor& gb = bank.behavior_table().grad;
      for (std::size_t r = 0; r < 3; ++r) {
        bool any = false;
        for (std::size_t c = 0; c < 4; ++c) any |= gt.at(r, c) != 0.0;
        CHECK(any == (r == t));
      }
      for (std::size_t r = 0; r < 2; ++r) {
        bool any = false;
        for (std::size_t c = 0; c < 4; ++c) any |= gb.at(r, c) != 0.0;
        CHECK(any == (r == b));
      }
    }
  }
}

TEST_CASE("changing one table row changes exactly the outputs that gathered it") {
  const FeatureSchema s = toy_schema(1, 1, 1, 3, 4, 6);
  ParameterStore store;
  const EmbeddingBank bank(s, store, 5);
  const std::vector<std::vector<std::int64_t>> ids{{1, 3, 1, 0}};
  Tape before;
  const Tensor a = bank.embed_sparse(before, ids)[0].value();
  bank.sparse_table(0).value.at(1, 2) += 0.5;
  Tape after;
  const Tensor b = bank.embed_sparse(after, ids)[0].value();
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 3; ++c) CHECK((a.at(r, c) != b.at(r, c)) == (ids[0][r] == 1 && c == 2));
  }
}

TEST_CASE("pad row gets no gradient through masked attention") {
  const FeatureSchema s = toy_schema(1, 1, 1, 4, 5, 9);
  ParameterStore store;
  const EmbeddingBank bank(s, store, 5);
  const ConditionalTransformer tim(store, {.d = 4, .heads = 2, .d_f = 8}, InjectionSite::ln, 8, 6);
  const auto data = random_instances(s, 8, 3, 0.3);
  const Batch batch = Batch::build(data, s);
  Tape tape;
  const Var x = bank.embed_sequence(tape, batch.seqs[0], 0);
  const Var item = bank.embed_target(tape, batch.target, 0);
  const TransformerVars vars = tim.conditioned_vars(tape, bank.type_embeddings(tape, 0, 0), 0, 0);
  const Var out = tim.interest(tape, x, item, batch.seqs[0], vars);
  tape.backward(dtrn::testing::probe_loss(out));
  const Tensor& g = bank.sequence_table(0).grad;
  for (std::size_t c = 0; c < 4; ++c) CHECK(g.at(0, c) == 0.0);
  bool any = false;
  for (double v : g.data()) any |= v != 0.0;
  CHECK(any);
}

TEST_CASE("pad row embeddings never influence the loss") {
  const FeatureSchema s = toy_schema(2, 2, 2, 8, 5, 9);
  const auto data = random_instances(s, 16, 4, 0.3);
  const Batch batch = Batch::build(data, s);
  for (const char* variant : {"baseline", "DTRN"}) {
    ModelConfig cfg;
    cfg.set_variant(parse_variant(variant));
    DtrnModel model(s, cfg, 9);
    auto loss = [&] {
      Tape tape(false);
      return total_loss(model.forward(tape, batch).logits, batch.labels).value().item();
    };
    const double before = loss();
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t c = 0; c < 8; ++c) model.embeddings().sequence_table(b).value.at(0, c) += 3.0 * (c + 1);
    }
    CHECK(loss() == before);
  }
}

TEST_CASE("dataset json round trip") {
  const FeatureSchema s = toy_schema(3, 2, 2, 4);
  const auto data = random_instances(s, 30, 5);
  const auto dir = dtrn::testing::scratch_dir("jsonl");
  write_dataset(dir / "d.jsonl", data);
  CHECK(read_dataset(dir / "d.jsonl") == data);
  CHECK(read_dataset(dir / "d.jsonl", s) == data);

  const Instance inst = instance_from_json(R"({"sparse":[1,2],"seqs":[[3],[]],"labels":[0,1],"target":4})");
  CHECK(inst.sparse == std::vector<std::int64_t>{1, 2});
  CHECK(inst.seqs[0] == std::vector<std::int64_t>{3});
  CHECK(inst.seqs[1].empty());
  CHECK(inst.labels == std::vector<int>{0, 1});
  CHECK(inst.target == 4);
  CHECK(instance_from_json(instance_to_json(inst)) == inst);

  CHECK_THROWS_AS(instance_from_json("{\"sparse\":[1]"), Error);
  CHECK_THROWS_AS(instance_from_json(R"({"sparse":[1],"seqs":[],"labels":[]})"), Error);
}

TEST_CASE("instance validation against the schema") {
  const FeatureSchema s = toy_schema(2, 1, 2, 4, 5, 6);
  Instance ok{{0, 5}, {{1, 5}}, {0, 1}, 3};
  CHECK_NOTHROW(validate_instance(ok, s));
  Instance bad = ok;
  bad.sparse[1] = 6;
  CHECK_THROWS_AS(validate_instance(bad, s), IndexError);
  bad = ok;
  bad.seqs[0].push_back(0);
  CHECK_THROWS_AS(validate_instance(bad, s), IndexError);
  bad = ok;
  bad.labels[0] = 2;
  CHECK_THROWS_AS(validate_instance(bad, s), IndexError);
  bad = ok;
  bad.target = 0;
  CHECK_THROWS_AS(validate_instance(bad, s), IndexError);
  bad = ok;
  bad.labels.pop_back();
  CHECK_THROWS_AS(validate_instance(bad, s), IndexError);
}

TEST_CASE("key-value config parsing") {
  const KeyValueConfig kv = KeyValueConfig::parse("# comment\n a = 1 \n\nb=0.5,2\nm=1,2;3,4\nflag=true\n");
  CHECK(kv.get_int("a") == 1);
  CHECK(kv.get_doubles("b") == std::vector<double>{0.5, 2});
  CHECK(kv.get_matrix("m") == std::vector<std::vector<double>>{{1, 2}, {3, 4}});
  CHECK(kv.get_bool("flag", false));
  CHECK(kv.get_int("missing", 7) == 7);
  CHECK_THROWS_AS(kv.get_int("missing"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("a=x").get_int("a"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign"), ConfigError);
  CHECK_THROWS_AS(kv.require_known({"a", "b"}), ConfigError);
  CHECK_NOTHROW(kv.require_known({"a", "b", "m", "flag"}));
  CHECK(KeyValueConfig::parse(kv.to_text()).hash() == kv.hash());
}
