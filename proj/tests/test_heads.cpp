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

#include <numeric>

#include "dtrn/heads.hpp"
#include "test_support.hpp"

using namespace dtrn;
using dtrn::testing::random_tensor;

namespace {

constexpr HeadKind kAllKinds[] = {HeadKind::share_bottom, HeadKind::mmoe, HeadKind::ple, HeadKind::aitm};

std::vector<Var> random_reps(Tape& tape, std::size_t tasks, std::size_t batch, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Var> reps;
  for (std::size_t t = 0; t < tasks; ++t) reps.push_back(tape.constant(random_tensor({batch, width}, rng)));
  return reps;
}

std::vector<double> mlp_rows(const std::vector<double>& x, const ParameterStore& store, const std::string& name,
                             bool relu_out) {
  auto layer = [&](const std::vector<double>& in, const std::string& l, bool relu_it) {
    const Tensor& w = store.at(name + "." + l + ".w").value;
    const Tensor& b = store.at(name + "." + l + ".b").value;
    std::vector<double> out(w.dim(1));
    for (std::size_t j = 0; j < out.size(); ++j) {
      double z = b[j];
      for (std::size_t k = 0; k < in.size(); ++k) z += in[k] * w.at(k, j);
      out[j] = relu_it ? std::max(0.0, z) : z;
    }
    return out;
  };
  return layer(layer(x, "l1", true), "l2", relu_out);
}

}  // namespace

TEST_CASE("head kind names") {
  for (HeadKind k : kAllKinds) CHECK(parse_head_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_head_kind("m2m"), ConfigError);
}

TEST_CASE("config validation") {
  HeadConfig cfg{.kind = HeadKind::mmoe, .tasks = 2, .width = 4, .n_experts = 0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.n_experts = 2;
  cfg.active = {true};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("share_bottom matches a scalar loop") {
  ParameterStore store;
  const MultiTaskHead head(store, {.kind = HeadKind::share_bottom, .tasks = 2, .width = 4, .expert_hidden = 2,
                                   .tower_hidden = 2},
                           3);
  std::mt19937_64 rng(4);
  for (auto& p : store) p.value = random_tensor(p.value.shape(), rng);
  Tape tape;
  const auto reps = random_reps(tape, 2, 3, 4, 5);
  const TaskLogits out = head.forward(tape, reps);
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t i = 0; i < 3; ++i) {
      std::vector<double> x(4);
      for (std::size_t c = 0; c < 4; ++c) x[c] = reps[t].value().at(i, c);
      const auto z = mlp_rows(x, store, "head.trunk", true);
      const auto o = mlp_rows(z, store, "head.tower." + std::to_string(t), false);
      CHECK(std::abs(out.o[t].value()[i] - o[0]) <= 1e-6);
    }
  }
}

TEST_CASE("mmoe with one expert equals share_bottom with that expert as trunk") {
  ParameterStore a, b;
  const MultiTaskHead mmoe(a, {.kind = HeadKind::mmoe, .tasks = 2, .width = 4, .n_experts = 1}, 3);
  const MultiTaskHead sb(b, {.kind = HeadKind::share_bottom, .tasks = 2, .width = 4}, 3);
  for (auto& p : b) {
    std::string name = p.name;
    if (name.rfind("head.trunk", 0) == 0) name.replace(0, 10, "head.expert.0");
    p.value = a.at(name).value;
  }
  Tape tape;
  const auto reps = random_reps(tape, 2, 5, 4, 6);
  const TaskLogits x = mmoe.forward(tape, reps);
  const TaskLogits y = sb.forward(tape, reps);
  CHECK(x.logits() == y.logits());
  CHECK(x.gates[0].value() == Tensor({5, 1}, 1.0));
}

TEST_CASE("gates form a probability simplex") {
  for (HeadKind k : {HeadKind::mmoe, HeadKind::ple}) {
    ParameterStore store;
    const MultiTaskHead head(store, {.kind = k, .tasks = 3, .width = 6, .n_experts = 3}, 3);
    std::mt19937_64 rng(7);
    for (auto& p : store) p.value = random_tensor(p.value.shape(), rng, -2, 2);
    Tape tape;
    const TaskLogits out = head.forward(tape, random_reps(tape, 3, 8, 6, 8));
    for (std::size_t t = 0; t < 3; ++t) {
      const Tensor& g = out.gates[t].value();
      CHECK(g.shape() == Shape{8, k == HeadKind::ple ? 4u : 3u});
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) {
          CHECK(g.at(r, c) >= 0.0);
          s += g.at(r, c);
        }
        CHECK(std::abs(s - 1.0) <= 1e-6);
      }
    }
  }
}

TEST_CASE("every head emits T logits and routes gradient to every representation") {
  for (HeadKind k : kAllKinds) {
    ParameterStore store;
    const MultiTaskHead head(store, {.kind = k, .tasks = 3, .width = 5, .aitm_chains = "0>1>2"}, 3);
    ParameterStore inputs;
    std::mt19937_64 rng(9);
    std::vector<Parameter*> reps;
    for (std::size_t t = 0; t < 3; ++t) reps.push_back(&inputs.add("r" + std::to_string(t), random_tensor({4, 5}, rng)));
    for (std::size_t t = 0; t < 3; ++t) {
      inputs.zero_grads();
      Tape tape;
      std::vector<Var> vars;
      for (Parameter* p : reps) vars.push_back(tape.param(*p));
      const TaskLogits out = head.forward(tape, vars);
      CHECK(out.logits().shape() == Shape{4, 3});
      const Tensor probs = out.probabilities();
      for (std::size_t i = 0; i < probs.size(); ++i) {
        CHECK(probs[i] > 0.0);
        CHECK(probs[i] < 1.0);
        CHECK(probs[i] == doctest::Approx(1.0 / (1.0 + std::exp(-out.logits()[i]))));
      }
      tape.backward(bce_with_logits(out.o[t], std::vector<Scalar>{1, 0, 0, 1}));
      double norm = 0.0;
      for (double g : reps[t]->grad.data()) norm += std::abs(g);
      INFO(to_string(k), " task ", t);
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("head rejects mismatched inputs") {
  ParameterStore store;
  const MultiTaskHead head(store, {.kind = HeadKind::mmoe, .tasks = 2, .width = 5}, 3);
  Tape tape;
  CHECK_THROWS_AS(head.forward(tape, random_reps(tape, 2, 3, 4, 1)), DimensionError);
  CHECK_THROWS_AS(head.forward(tape, random_reps(tape, 3, 3, 5, 1)), DimensionError);
}

TEST_CASE("aitm chains") {
  auto pred = parse_aitm_chains("0>1;0>2>3", 4);
  CHECK(!pred[0]);
  CHECK(pred[1] == 0u);
  CHECK(pred[2] == 0u);
  CHECK(pred[3] == 2u);
  CHECK(parse_aitm_chains("", 3) == std::vector<std::optional<std::size_t>>(3));

  pred = parse_aitm_chains("0>1>2>3", 4, {true, true, false, true});
  CHECK(pred[3] == 1u);
  CHECK(!pred[2]);

  CHECK_THROWS_AS(parse_aitm_chains("0>4", 4), ConfigError);
  CHECK_THROWS_AS(parse_aitm_chains("0>x", 4), ConfigError);
  CHECK_THROWS_AS(parse_aitm_chains("0>2;1>2", 4), ConfigError);
  CHECK_THROWS_AS(parse_aitm_chains("0>1>0", 4), ConfigError);
}

TEST_CASE("aitm transfer follows the chain direction") {
  ParameterStore store;
  const MultiTaskHead head(store, {.kind = HeadKind::aitm, .tasks = 4, .width = 5, .aitm_chains = "0>1>2"}, 3);
  Tape tape;
  const auto reps = random_reps(tape, 4, 6, 5, 11);
  const Tensor base = head.forward(tape, reps).logits();
  for (std::size_t t = 0; t < 4; ++t) {
    auto moved = reps;
    moved[t] = add_scalar(reps[t], 0.5);
    const Tensor y = head.forward(tape, moved).logits();
    for (std::size_t u = 0; u < 4; ++u) {
      bool changed = false;
      for (std::size_t i = 0; i < 6; ++i) changed |= y.at(i, u) != base.at(i, u);
      // Task 3 is outside the chain; tasks downstream of t along 0>1>2 move with it.
      const bool downstream = u == t || (t < 3 && u < 3 && u > t);
      INFO("perturb ", t, " observe ", u);
      CHECK(changed == downstream);
    }
  }
}

TEST_CASE("removed tasks have no tower and no logits") {
  ParameterStore store;
  const MultiTaskHead head(store, {.kind = HeadKind::share_bottom, .tasks = 3, .width = 4,
                                   .active = {true, false, true}},
                           3);
  CHECK(store.find("head.tower.1.l1.w") == nullptr);
  Tape tape;
  const TaskLogits out = head.forward(tape, random_reps(tape, 3, 2, 4, 1));
  CHECK_FALSE(out.o[1].valid());
  CHECK(out.logits().at(0, 1) == 0.0);
  CHECK(out.probabilities().at(1, 1) == 0.5);
  const std::vector<std::vector<Scalar>> labels{{1, 0}, {2, 2}, {0, 1}};
  CHECK_NOTHROW(total_loss(out, labels));
}

TEST_CASE("total_loss examples") {
  Tape tape;
  TaskLogits one;
  one.o = {tape.constant(Tensor::vector({0.0}))};
  CHECK(std::abs(total_loss(one, {{1.0}}).value().item() - std::log(2.0)) <= 1e-6);

  std::mt19937_64 rng(12);
  const Tensor o = random_tensor({7}, rng, -4, 4);
  const std::vector<Scalar> y{1, 0, 0, 1, 1, 0, 1};
  TaskLogits single, twice;
  single.o = {tape.constant(o)};
  twice.o = {tape.constant(o), tape.constant(o)};
  const double l1 = total_loss(single, {y}).value().item();
  CHECK(total_loss(twice, {y, y}).value().item() == 2 * l1);

  double expect = 0.0;
  for (std::size_t i = 0; i < 7; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-o[i]));
    expect -= y[i] * std::log(p) + (1 - y[i]) * std::log(1 - p);
  }
  CHECK(std::abs(l1 - expect / 7) <= 1e-6);

  CHECK_THROWS_AS(total_loss(single, {{1, 0, 0.5, 1, 1, 0, 1}}), Error);
  TaskLogits none;
  none.o.resize(1);
  CHECK_THROWS_AS(total_loss(none, {y}), ConfigError);
}

TEST_CASE("loss is covariant under task permutation") {
  for (HeadKind k : {HeadKind::share_bottom, HeadKind::mmoe, HeadKind::ple}) {
    ParameterStore a, b;
    const MultiTaskHead h1(a, {.kind = k, .tasks = 3, .width = 4, .n_experts = 2}, 3);
    const MultiTaskHead h2(b, {.kind = k, .tasks = 3, .width = 4, .n_experts = 2}, 3);
    const std::size_t perm[3] = {2, 0, 1};
    // Copy weights with task-indexed names permuted.
    for (auto& p : b) {
      std::string name = p.name;
      for (const std::string prefix : {"head.tower.", "head.gate.", "head.specific."}) {
        if (name.rfind(prefix, 0) == 0) {
          const std::size_t t = name[prefix.size()] - '0';
          name[prefix.size()] = static_cast<char>('0' + perm[t]);
        }
      }
      p.value = a.at(name).value;
    }
    Tape tape;
    const auto reps = random_reps(tape, 3, 5, 4, 13);
    const std::vector<std::vector<Scalar>> y{{1, 0, 0, 1, 1}, {0, 0, 1, 1, 0}, {1, 1, 1, 0, 0}};
    std::vector<Var> reps2(3);
    std::vector<std::vector<Scalar>> y2(3);
    for (std::size_t t = 0; t < 3; ++t) {
      reps2[t] = reps[perm[t]];
      y2[t] = y[perm[t]];
    }
    const double l1 = total_loss(h1.forward(tape, reps), y).value().item();
    const double l2 = total_loss(h2.forward(tape, reps2), y2).value().item();
    INFO(to_string(k));
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
  }
}

TEST_CASE("head gradients match finite differences") {
  for (HeadKind k : kAllKinds) {
    ParameterStore store;
    const MultiTaskHead head(store, {.kind = k, .tasks = 2, .width = 4, .n_experts = 2, .expert_hidden = 5,
                                     .tower_hidden = 3, .aitm_chains = "0>1"},
                             3);
    std::mt19937_64 rng(14);
    for (auto& p : store) p.value = random_tensor(p.value.shape(), rng);
    const Tensor r0 = random_tensor({3, 4}, rng), r1 = random_tensor({3, 4}, rng);
    const std::vector<std::vector<Scalar>> y{{1, 0, 1}, {0, 0, 1}};
    auto loss = [&](Tape& tape) {
      const std::vector<Var> reps{tape.constant(r0), tape.constant(r1)};
      return total_loss(head.forward(tape, reps), y);
    };
    const auto r = dtrn::testing::check_gradients(dtrn::testing::all_parameters(store), loss);
    INFO(to_string(k), ": ", r.worst);
    CHECK(r.max_rel <= 1e-4);
  }
}
