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

#include "dtrn/heads.hpp"

#include <cmath>

#include "dtrn/config.hpp"

namespace dtrn {

HeadKind parse_head_kind(std::string_view name) {
  if (name == "share_bottom") return HeadKind::share_bottom;
  if (name == "mmoe") return HeadKind::mmoe;
  if (name == "ple") return HeadKind::ple;
  if (name == "aitm") return HeadKind::aitm;
  throw ConfigError("unknown head '" + std::string(name) + "' (expected share_bottom, mmoe, ple or aitm)");
}

std::string_view to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::share_bottom:
      return "share_bottom";
    case HeadKind::mmoe:
      return "mmoe";
    case HeadKind::ple:
      return "ple";
    case HeadKind::aitm:
      return "aitm";
  }
  return "?";
}

void HeadConfig::validate() const {
  if (tasks == 0 || width == 0) throw ConfigError("head needs tasks >= 1 and width >= 1");
  if (expert_hidden == 0 || tower_hidden == 0) throw ConfigError("expert_hidden and tower_hidden must be >= 1");
  if ((kind == HeadKind::mmoe || kind == HeadKind::ple) && n_experts == 0) {
    throw ConfigError("n_experts must be >= 1 for mmoe and ple");
  }
  if (!active.empty() && active.size() != tasks) throw ConfigError("task mask length differs from task count");
}

std::vector<std::optional<std::size_t>> parse_aitm_chains(std::string_view chains, std::size_t tasks,
                                                          const std::vector<bool>& active) {
  std::vector<std::optional<std::size_t>> pred(tasks);
  for (const std::string& chain : split(chains, ';')) {
    if (trim(chain).empty()) continue;
    std::vector<std::size_t> ids;
    for (const std::string& tok : split(chain, '>')) {
      const std::string s = trim(tok);
      std::size_t id = 0;
      try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size() || v < 0) throw std::invalid_argument(s);
        id = static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        throw ConfigError("aitm_chains: '" + s + "' is not a task id");
      }
      if (id >= tasks) throw ConfigError("aitm_chains: task " + std::to_string(id) + " out of range");
      ids.push_back(id);
    }
    for (std::size_t i = 1; i < ids.size(); ++i) {
      auto& p = pred[ids[i]];
      if (p && *p != ids[i - 1]) {
        throw ConfigError("aitm_chains: task " + std::to_string(ids[i]) + " has two predecessors");
      }
      p = ids[i - 1];
    }
  }
  for (std::size_t t = 0; t < tasks; ++t) {
    std::size_t steps = 0;
    for (auto p = pred[t]; p; p = pred[*p]) {
      if (*p == t || ++steps > tasks) throw ConfigError("aitm_chains: cycle through task " + std::to_string(t));
    }
  }
  if (!active.empty()) {
    auto alive = [&](std::size_t t) { return active.at(t); };
    std::vector<std::optional<std::size_t>> spliced(tasks);
    for (std::size_t t = 0; t < tasks; ++t) {
      auto p = pred[t];
      while (p && !alive(*p)) p = pred[*p];
      spliced[t] = alive(t) ? p : std::nullopt;
    }
    pred = std::move(spliced);
  }
  return pred;
}

Tensor TaskLogits::logits() const {
  std::size_t batch = 0;
  for (const Var& v : o) {
    if (v.valid()) batch = v.value().size();
  }
  if (batch == 0) throw DimensionError("no active task logits");
  const std::size_t T = o.size();
  Tensor out({batch, T}, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    if (!o[t].valid()) continue;
    const Tensor& v = o[t].value();
    for (std::size_t r = 0; r < batch; ++r) out[r * T + t] = v[r];
  }
  return out;
}

Tensor TaskLogits::probabilities() const {
  Tensor out = logits();
  const std::size_t T = o.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = o[i % T].valid() ? stable_sigmoid(out[i]) : 0.5;
  }
  return out;
}

MultiTaskHead::MultiTaskHead(ParameterStore& store, const HeadConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t D = cfg_.width, T = cfg_.tasks, E = cfg_.n_experts, eh = cfg_.expert_hidden;
  auto expert = [&](const std::string& name) { return Mlp2(store, name, D, eh, eh, seed, Activation::relu); };
  switch (cfg_.kind) {
    case HeadKind::share_bottom:
      trunk_ = expert("head.trunk");
      break;
    case HeadKind::mmoe:
      for (std::size_t e = 0; e < E; ++e) experts_.push_back(expert("head.expert." + std::to_string(e)));
      for (std::size_t t = 0; t < T; ++t) {
        gates_.emplace_back(store, "head.gate." + std::to_string(t), D, E, seed);
      }
      break;
    case HeadKind::ple:
      for (std::size_t e = 0; e < E; ++e) experts_.push_back(expert("head.shared." + std::to_string(e)));
      for (std::size_t t = 0; t < T; ++t) {
        specific_.push_back(expert("head.specific." + std::to_string(t)));
        gates_.emplace_back(store, "head.gate." + std::to_string(t), D, E + 1, seed);
      }
      break;
    case HeadKind::aitm:
      pred_ = parse_aitm_chains(cfg_.aitm_chains, T, cfg_.active);
      for (std::size_t t = 0; t < T; ++t) {
        const std::string base = "head.aitm." + std::to_string(t);
        specific_.push_back(expert(base + ".enc"));
        transfer_.emplace_back(store, base + ".transfer", eh, eh, seed);
        attn_q_.emplace_back(store, base + ".q", eh, eh, seed);
        attn_k_.emplace_back(store, base + ".k", eh, eh, seed);
        attn_v_.emplace_back(store, base + ".v", eh, eh, seed);
      }
      break;
  }
  if (pred_.empty()) pred_.assign(T, std::nullopt);
  std::vector<bool> placed(T, false);
  while (order_.size() < T) {
    for (std::size_t t = 0; t < T; ++t) {
      if (!placed[t] && (!pred_[t] || placed[*pred_[t]])) {
        placed[t] = true;
        order_.push_back(t);
      }
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    towers_.emplace_back(cfg_.is_active(t)
                             ? Mlp2(store, "head.tower." + std::to_string(t), eh, cfg_.tower_hidden, 1, seed,
                                    Activation::none)
                             : Mlp2());
  }
}

Var MultiTaskHead::mix(Var gate_logits, std::span<const Var> experts) const {
  const std::size_t B = gate_logits.shape()[0], E = experts.size(), eh = cfg_.expert_hidden;
  if (E == 1) return experts[0];
  const Var w = reshape(softmax(gate_logits), {B, 1, E});
  const Var stacked = reshape(concat_last(experts), {B, E, eh});
  return reshape(bmm(w, stacked), {B, eh});
}

TaskLogits MultiTaskHead::forward(Tape& tape, std::span<const Var> reps) const {
  const std::size_t T = cfg_.tasks;
  if (reps.size() != T) {
    throw DimensionError("head expects " + std::to_string(T) + " task representations, got " +
                         std::to_string(reps.size()));
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (!cfg_.is_active(t)) continue;
    const Shape& s = reps[t].shape();
    if (s.size() != 2 || s[1] != cfg_.width) {
      throw DimensionError("task " + std::to_string(t) + " representation " + shape_str(s) + ", head width " +
                           std::to_string(cfg_.width));
    }
  }
  TaskLogits out;
  out.o.resize(T);
  out.gates.resize(T);
  out.tower_inputs.resize(T);
  const std::size_t eh = cfg_.expert_hidden;
  const Scalar inv_sqrt = 1.0 / std::sqrt(static_cast<Scalar>(eh));
  for (std::size_t t : order_) {
    if (!cfg_.is_active(t)) continue;
    const Var r = reps[t];
    const std::size_t B = r.shape()[0];
    Var z;
    switch (cfg_.kind) {
      case HeadKind::share_bottom:
        z = trunk_.forward(tape, r);
        break;
      case HeadKind::mmoe: {
        std::vector<Var> ex;
        for (const auto& e : experts_) ex.push_back(e.forward(tape, r));
        const Var g = gates_[t].forward(tape, r);
        out.gates[t] = softmax(g);
        z = mix(g, ex);
        break;
      }
      case HeadKind::ple: {
        std::vector<Var> ex{specific_[t].forward(tape, r)};
        for (const auto& e : experts_) ex.push_back(e.forward(tape, r));
        const Var g = gates_[t].forward(tape, r);
        out.gates[t] = softmax(g);
        z = mix(g, ex);
        break;
      }
      case HeadKind::aitm: {
        const Var own = specific_[t].forward(tape, r);
        if (!pred_[t]) {
          z = own;
          break;
        }
        const Var moved = relu(transfer_[t].forward(tape, out.tower_inputs[*pred_[t]]));
        const Var cand[] = {own, moved};
        std::vector<Var> scores, values;
        for (const Var& u : cand) {
          const Var q = reshape(attn_q_[t].forward(tape, u), {B, 1, eh});
          const Var k = reshape(attn_k_[t].forward(tape, u), {B, 1, eh});
          scores.push_back(bmm(q, k, /*transpose_b=*/true));
          values.push_back(attn_v_[t].forward(tape, u));
        }
        const Var w = softmax(scale(concat_last(scores), inv_sqrt));  // [B, 1, 2]
        z = reshape(bmm(w, reshape(concat_last(values), {B, 2, eh})), {B, eh});
        break;
      }
    }
    out.tower_inputs[t] = z;
    out.o[t] = reshape(towers_[t].forward(tape, z), {B});
  }
  return out;
}

Var total_loss(const TaskLogits& out, const std::vector<std::vector<Scalar>>& labels) {
  if (labels.size() != out.o.size()) {
    throw DimensionError("total_loss: " + std::to_string(labels.size()) + " label columns for " +
                         std::to_string(out.o.size()) + " tasks");
  }
  Var loss;
  for (std::size_t t = 0; t < out.o.size(); ++t) {
    if (!out.o[t].valid()) continue;
    for (Scalar y : labels[t]) {
      if (y != 0.0 && y != 1.0) throw Error("task " + std::to_string(t) + " has non-binary label " + std::to_string(y));
    }
    const Var term = bce_with_logits(out.o[t], labels[t]);
    loss = loss.valid() ? add(loss, term) : term;
  }
  if (!loss.valid()) throw ConfigError("total_loss: every task is removed");
  return loss;
}

}  // namespace dtrn
