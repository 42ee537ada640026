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

#include "dtrn/model.hpp"
#include "dtrn/optim.hpp"
#include "dtrn/train.hpp"
#include "test_support.hpp"

using namespace dtrn;
using dtrn::testing::random_instances;
using dtrn::testing::toy_schema;

TEST_CASE("injection site names") {
  for (const char* name : {"ln", "qkv", "ffn1", "ffn2"}) CHECK(to_string(parse_injection_site(name)) == name);
  CHECK_THROWS_AS(parse_injection_site("attn"), ConfigError);
}

TEST_CASE("fresh hypernetwork is neutral for every pair") {
  const FeatureSchema s = toy_schema(1, 3, 4, 6);
  ParameterStore store;
  const EmbeddingBank bank(s, store, 1);
  HyperNet hyper(store, "h", 6, 12, 2);
  hyper.register_ln_site("enc0.ln1");
  hyper.register_residual_target("enc0.attn.wq", {6, 6});
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t b = 0; b < 3; ++b) {
      Tape tape;
      const TypeEmbedding te = bank.type_embeddings(tape, t, b);
      const ConditionalParams p = hyper.generate_cln_params(tape, te, "enc0.ln1", t, b);
      CHECK(p.gamma.value() == Tensor({6}, 1.0));
      CHECK(p.beta.value() == Tensor({6}, 0.0));
      CHECK(p.task == t);
      CHECK(p.behavior == b);
      const ResidualModulation r = hyper.generate_residual_modulation(tape, te, "enc0.attn.wq");
      CHECK(r.delta.value() == Tensor({6, 6}, 0.0));
    }
  }
}

TEST_CASE("conditioning is a pure function of the pair") {
  const FeatureSchema s = toy_schema(1, 2, 2, 4);
  ParameterStore store;
  const EmbeddingBank bank(s, store, 1);
  HyperNet hyper(store, "h", 4, 8, 2);
  hyper.register_ln_site("s");
  std::mt19937_64 rng(3);
  for (auto& p : store) p.value = dtrn::testing::random_tensor(p.value.shape(), rng);
  Tape tape;
  const auto a = hyper.generate_cln_params(tape, bank.type_embeddings(tape, 1, 0), "s", 1, 0);
  const auto b = hyper.generate_cln_params(tape, bank.type_embeddings(tape, 1, 0), "s", 1, 0);
  const auto c = hyper.generate_cln_params(tape, bank.type_embeddings(tape, 0, 0), "s", 0, 0);
  CHECK(a.gamma.value() == b.gamma.value());
  CHECK(a.beta.value() == b.beta.value());
  CHECK(a.gamma.value() != c.gamma.value());
}

TEST_CASE("gamma and beta follow the two-layer perceptron") {
  ParameterStore store;
  HyperNet hyper(store, "h", 2, 3, 2);
  hyper.register_ln_site("s");
  std::mt19937_64 rng(4);
  for (auto& p : store) p.value = dtrn::testing::random_tensor(p.value.shape(), rng);
  Tape tape;
  const TypeEmbedding te{tape.constant(Tensor::vector({0.3, -0.2})), tape.constant(Tensor::vector({0.5, 0.1}))};
  const auto p = hyper.generate_cln_params(tape, te, "s", 0, 0);
  const double in[4] = {0.3, -0.2, 0.5, 0.1};
  for (const char* part : {"gamma", "beta"}) {
    const std::string base = std::string("h.s.") + part;
    const Tensor& w1 = store.at(base + ".l1.w").value;
    const Tensor& b1 = store.at(base + ".l1.b").value;
    const Tensor& w2 = store.at(base + ".l2.w").value;
    const Tensor& b2 = store.at(base + ".l2.b").value;
    for (std::size_t o = 0; o < 2; ++o) {
      double y = b2[o];
      for (std::size_t h = 0; h < 3; ++h) {
        double z = b1[h];
        for (std::size_t i = 0; i < 4; ++i) z += in[i] * w1.at(i, h);
        y += std::max(z, 0.0) * w2.at(h, o);
      }
      const double got = std::string(part) == "gamma" ? p.gamma.value()[o] - 1.0 : p.beta.value()[o];
      CHECK(got == doctest::Approx(y).epsilon(1e-12));
    }
  }
}

TEST_CASE("unregistered sites and duplicate registration") {
  const FeatureSchema s = toy_schema(1, 1, 1, 4);
  ParameterStore store;
  const EmbeddingBank bank(s, store, 1);
  HyperNet hyper(store, "h", 4, 8, 2);
  hyper.register_ln_site("a");
  hyper.register_residual_target("w", {4, 4});
  Tape tape;
  const TypeEmbedding te = bank.type_embeddings(tape, 0, 0);
  CHECK_THROWS_AS(hyper.generate_cln_params(tape, te, "b", 0, 0), ConfigError);
  CHECK_THROWS_AS(hyper.generate_residual_modulation(tape, te, "v"), ConfigError);
  CHECK_THROWS_AS(hyper.register_ln_site("a"), ConfigError);
  CHECK_THROWS_AS(hyper.register_residual_target("w", {2}), ConfigError);
}

TEST_CASE("delta of -1 annihilates the weight") {
  std::mt19937_64 rng(5);
  Tape tape;
  const Var w = tape.constant(dtrn::testing::random_tensor({3, 4}, rng));
  const Var delta = tape.constant(Tensor({3, 4}, -1.0));
  CHECK(mul(w, add_scalar(delta, 1.0)).value() == Tensor({3, 4}, 0.0));
}

TEST_CASE("residual deltas for two tasks separate after one step") {
  const FeatureSchema s = toy_schema(1, 1, 2, 4);
  ParameterStore store;
  const EmbeddingBank bank(s, store, 1);
  HyperNet hyper(store, "h", 4, 8, 2);
  hyper.register_residual_target("w", {4, 4});
  std::mt19937_64 rng(6);
  const Tensor base = dtrn::testing::random_tensor({4, 4}, rng);
  const Tensor x = dtrn::testing::random_tensor({5, 4}, rng);
  const std::vector<Scalar> y0{1, 0, 1, 0, 1}, y1{0, 1, 1, 0, 0};
  auto delta = [&](std::size_t t) {
    Tape tape;
    return hyper.generate_residual_modulation(tape, bank.type_embeddings(tape, t, 0), "w").delta.value();
  };
  CHECK(delta(0) == delta(1));

  Tape tape;
  Var loss;
  for (std::size_t t = 0; t < 2; ++t) {
    const auto mod = hyper.generate_residual_modulation(tape, bank.type_embeddings(tape, t, 0), "w");
    const Var w_eff = mul(tape.constant(base), add_scalar(mod.delta, 1.0));
    const Var logits = reshape(slice_last(matmul(tape.constant(x), w_eff), 0, 1), {5});
    const Var l = bce_with_logits(logits, t == 0 ? y0 : y1);
    loss = loss.valid() ? add(loss, l) : l;
  }
  tape.backward(loss);
  adam_step(store, {.lr = 0.01});
  CHECK(max_abs_diff(delta(0), delta(1)) > 0.0);
}

TEST_CASE("trained layer-norm conditioning differs across tasks") {
  const FeatureSchema s = toy_schema(2, 1, 2, 8, 5, 9);
  const auto data = random_instances(s, 128, 7);
  ModelConfig cfg;
  cfg.set_variant(Variant::dtrn);
  DtrnModel model(s, cfg, 3);
  train(model, data, {.lr = 0.01, .batch_size = 32, .epochs = 1, .seed = 2});
  Tape tape;
  const auto& bank = model.embeddings();
  const HyperNet* hyper = model.tim().hyper();
  REQUIRE(hyper != nullptr);
  for (const std::string& site : hyper->ln_sites()) {
    const auto a = hyper->generate_cln_params(tape, bank.type_embeddings(tape, 0, 0), site, 0, 0);
    const auto b = hyper->generate_cln_params(tape, bank.type_embeddings(tape, 1, 0), site, 1, 0);
    INFO(site);
    CHECK(max_abs_diff(a.gamma.value(), b.gamma.value()) + max_abs_diff(a.beta.value(), b.beta.value()) > 0.0);
  }
}

TEST_CASE("hypernetwork size does not depend on the number of tasks or behaviors") {
  for (const char* site : {"ln", "qkv", "ffn1", "ffn2"}) {
    std::size_t reference = 0;
    std::size_t reference_types = 0;
    for (auto [t, m] : {std::pair<std::size_t, std::size_t>{2, 2}, {3, 2}, {4, 5}, {1, 7}}) {
      const FeatureSchema s = toy_schema(2, m, t, 8);
      ModelConfig cfg;
      cfg.set_variant(Variant::dtrn);
      cfg.injection_site = parse_injection_site(site);
      const DtrnModel model(s, cfg, 1);
      const std::size_t hyper = model.parameters().scalar_count("tim.hyper");
      const std::size_t types = model.parameters().scalar_count("emb.task") +
                                model.parameters().scalar_count("emb.behavior");
      CHECK(hyper > 0);
      CHECK(types == (t + m) * 8);
      if (reference == 0) {
        reference = model.tim_parameter_count();
        reference_types = types;
      }
      INFO(site, " T=", t, " M=", m);
      CHECK(model.tim_parameter_count() == reference);
      CHECK(types - reference_types == (t + m - 4) * 8);
    }
  }
}
