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

#include "dtrn/model.hpp"

#include <algorithm>
#include <charconv>

namespace dtrn {

Variant parse_variant(std::string_view name) {
  if (name == "baseline") return Variant::baseline;
  if (name == "+TIM" || name == "tim") return Variant::tim;
  if (name == "+TRM" || name == "trm") return Variant::trm;
  if (name == "DTRN" || name == "dtrn") return Variant::dtrn;
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected baseline, +TIM, +TRM or DTRN)");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::baseline:
      return "baseline";
    case Variant::tim:
      return "+TIM";
    case Variant::trm:
      return "+TRM";
    case Variant::dtrn:
      return "DTRN";
  }
  return "?";
}

void ModelConfig::set_variant(Variant v) {
  use_tim = v == Variant::tim || v == Variant::dtrn;
  use_trm = v == Variant::trm || v == Variant::dtrn;
}

Variant ModelConfig::variant() const {
  if (use_tim && use_trm) return Variant::dtrn;
  if (use_tim) return Variant::tim;
  if (use_trm) return Variant::trm;
  return Variant::baseline;
}

const std::set<std::string>& ModelConfig::keys() {
  static const std::set<std::string> k{"heads",        "d_f",          "enc_layers",   "dec_layers",
                                       "use_tim",      "use_trm",      "variant",      "injection_site",
                                       "hyper_hidden", "trm_hidden",   "head",         "n_experts",
                                       "expert_hidden", "tower_hidden", "aitm_chains", "remove_tasks"};
  return k;
}

namespace {

std::size_t get_size(const KeyValueConfig& kv, std::string_view key, std::size_t fallback) {
  const std::int64_t v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError("config key '" + std::string(key) + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

}  // namespace

ModelConfig ModelConfig::from_config(const KeyValueConfig& kv) {
  ModelConfig c;
  c.heads = get_size(kv, "heads", c.heads);
  c.d_f = get_size(kv, "d_f", c.d_f);
  c.enc_layers = get_size(kv, "enc_layers", c.enc_layers);
  c.dec_layers = get_size(kv, "dec_layers", c.dec_layers);
  if (kv.has("variant")) c.set_variant(parse_variant(kv.get_string("variant")));
  c.use_tim = kv.get_bool("use_tim", c.use_tim);
  c.use_trm = kv.get_bool("use_trm", c.use_trm);
  c.injection_site = parse_injection_site(kv.get_string("injection_site", "ln"));
  c.hyper_hidden = get_size(kv, "hyper_hidden", c.hyper_hidden);
  c.trm_hidden = get_size(kv, "trm_hidden", c.trm_hidden);
  c.head = parse_head_kind(kv.get_string("head", "share_bottom"));
  c.n_experts = get_size(kv, "n_experts", c.n_experts);
  c.expert_hidden = get_size(kv, "expert_hidden", c.expert_hidden);
  c.tower_hidden = get_size(kv, "tower_hidden", c.tower_hidden);
  c.aitm_chains = kv.get_string("aitm_chains", "");
  for (const std::string& tok : split(kv.get_string("remove_tasks", ""), ',')) {
    const std::string s = trim(tok);
    if (s.empty()) continue;
    std::size_t t = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), t);
    if (ec != std::errc() || end != s.data() + s.size()) throw ConfigError("remove_tasks: '" + s + "' is not a task id");
    c.remove_tasks.push_back(t);
  }
  return c;
}

void ModelConfig::write(KeyValueConfig& kv) const {
  kv.set("heads", std::to_string(heads));
  kv.set("d_f", std::to_string(d_f));
  kv.set("enc_layers", std::to_string(enc_layers));
  kv.set("dec_layers", std::to_string(dec_layers));
  kv.set("use_tim", use_tim ? "true" : "false");
  kv.set("use_trm", use_trm ? "true" : "false");
  kv.set("injection_site", std::string(to_string(injection_site)));
  kv.set("hyper_hidden", std::to_string(hyper_hidden));
  kv.set("trm_hidden", std::to_string(trm_hidden));
  kv.set("head", std::string(to_string(head)));
  kv.set("n_experts", std::to_string(n_experts));
  kv.set("expert_hidden", std::to_string(expert_hidden));
  kv.set("tower_hidden", std::to_string(tower_hidden));
  kv.set("aitm_chains", aitm_chains);
  std::string removed;
  for (std::size_t t : remove_tasks) removed += (removed.empty() ? "" : ",") + std::to_string(t);
  kv.set("remove_tasks", removed);
}

DtrnModel::DtrnModel(const FeatureSchema& schema, const ModelConfig& cfg, std::uint64_t seed)
    : schema_(schema), cfg_(cfg), store_(std::make_unique<ParameterStore>()) {
  schema_.validate();
  const std::size_t T = schema_.n_tasks, d = schema_.dim, D = schema_.bottom_width();
  active_.assign(T, true);
  for (std::size_t t : cfg_.remove_tasks) {
    if (t >= T) throw ConfigError("remove_tasks: task " + std::to_string(t) + " out of range");
    active_[t] = false;
  }
  if (std::none_of(active_.begin(), active_.end(), [](bool a) { return a; })) {
    throw ConfigError("remove_tasks removes every task");
  }

  bank_ = std::make_unique<EmbeddingBank>(schema_, *store_, seed);
  TransformerConfig tc{d, cfg_.heads, cfg_.d_f, cfg_.enc_layers, cfg_.dec_layers};
  const std::size_t hyper_hidden = cfg_.hyper_hidden ? cfg_.hyper_hidden : 2 * d;
  tim_ = std::make_unique<ConditionalTransformer>(
      *store_, tc, cfg_.use_tim ? std::optional(cfg_.injection_site) : std::nullopt, hyper_hidden, seed);
  if (cfg_.use_trm) {
    const std::size_t hidden = cfg_.trm_hidden ? cfg_.trm_hidden : std::max<std::size_t>(1, D / 4);
    trm_ = std::make_unique<RefineNet>(*store_, T, D, hidden, seed);
  }
  HeadConfig hc;
  hc.kind = cfg_.head;
  hc.tasks = T;
  hc.width = D;
  hc.n_experts = cfg_.n_experts;
  hc.expert_hidden = cfg_.expert_hidden;
  hc.tower_hidden = cfg_.tower_hidden;
  hc.aitm_chains = cfg_.aitm_chains;
  hc.active = active_;
  head_ = std::make_unique<MultiTaskHead>(*store_, hc, seed);
}

ModelOutput DtrnModel::forward(Tape& tape, const Batch& batch) const {
  const std::size_t T = schema_.n_tasks, M = schema_.n_seqs;
  if (batch.seqs.size() != M || batch.sparse.size() != schema_.n_sparse || batch.labels.size() != T) {
    throw DimensionError("batch layout does not match the model schema");
  }
  const std::vector<Var> sparse = bank_->embed_sparse(tape, batch.sparse);
  std::vector<Var> x(M), e_item(M);
  for (std::size_t b = 0; b < M; ++b) {
    x[b] = bank_->embed_sequence(tape, batch.seqs[b], b);
    e_item[b] = bank_->embed_target(tape, batch.target, b);
  }

  ModelOutput out;
  out.interests.assign(T, {});
  const TransformerVars base = tim_->base_vars(tape);
  if (!tim_->conditioned()) {
    std::vector<Var> shared(M);
    for (std::size_t b = 0; b < M; ++b) shared[b] = tim_->interest(tape, x[b], e_item[b], batch.seqs[b], base);
    for (std::size_t t = 0; t < T; ++t) {
      if (active_[t]) out.interests[t] = shared;
    }
  } else {
    std::vector<Var> first(M);
    if (tim_->attention_shared_across_pairs()) {
      for (std::size_t b = 0; b < M; ++b) {
        if (batch.seqs[b].any_nonempty()) first[b] = tim_->encoder_first_attention(x[b], batch.seqs[b], base);
      }
    }
    for (std::size_t t = 0; t < T; ++t) {
      if (!active_[t]) continue;
      for (std::size_t b = 0; b < M; ++b) {
        const TransformerVars vars = tim_->conditioned_vars(tape, bank_->type_embeddings(tape, t, b), t, b);
        out.interests[t].push_back(tim_->interest(tape, x[b], e_item[b], batch.seqs[b], vars, first[b]));
      }
    }
  }

  std::vector<Var> reps(T);
  std::optional<Var> shared_raw;
  for (std::size_t t = 0; t < T; ++t) {
    if (!active_[t]) {
      out.bottoms.push_back({});
      continue;
    }
    Var raw;
    if (!tim_->conditioned() && shared_raw) {
      raw = *shared_raw;
    } else {
      raw = build_raw(sparse, concat_interests(out.interests[t]), schema_.bottom_width());
      if (!tim_->conditioned()) shared_raw = raw;
    }
    TaskBottomRepresentation rep = trm_ ? trm_->refine(tape, raw, t) : TaskBottomRepresentation{raw, {}, raw, t};
    reps[t] = rep.refined;
    out.bottoms.push_back(rep);
  }
  out.logits = head_->forward(tape, reps);
  return out;
}

}  // namespace dtrn
