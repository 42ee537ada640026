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

#include <optional>
#include <string>
#include <vector>

#include "dtrn/embedding.hpp"
#include "dtrn/hypernet.hpp"

namespace dtrn {

struct TransformerConfig {
  std::size_t d = 16;
  std::size_t heads = 2;
  std::size_t d_f = 32;
  std::size_t enc_layers = 1;
  std::size_t dec_layers = 1;

  void validate() const;
  std::size_t head_dim() const noexcept { return d / heads; }
};

// Per-head projections are stored side by side: W^Q = [W^Q_1 ... W^Q_h] is
// d x d, head i owning columns [i*d', (i+1)*d').
struct AttentionVars {
  Var wq, wk, wv, wo;
};

struct FfnVars {
  Var w1, b1, w2, b2;
};

// Base affine plus optional conditional scale/shift.
struct NormVars {
  Var gamma, beta;
  std::optional<ConditionalParams> cond;
};

struct LayerVars {
  AttentionVars attn;
  FfnVars ffn;
  NormVars ln1, ln2;
};

/// Weights of every layer as tape nodes, already conditioned (or not) for a
/// single (task, behavior) pair.
struct TransformerVars {
  std::vector<LayerVars> enc;
  std::vector<LayerVars> dec;
};

// Multi-head attention with queries from q_src and keys/values from kv_src.
// q_src: [B, Lq, d], kv_src: [B, L, d], mask: [B, Lq, L].
Var attention(Var q_src, Var kv_src, const Mask& mask, const AttentionVars& w, std::size_t heads);
Var mhsa(Var x, const Mask& mask, const AttentionVars& w, std::size_t heads);
Var mha_decode(Var q_src, Var kv_src, const Mask& mask, const AttentionVars& w, std::size_t heads);

// ReLU(x W1 + b1) W2 + b2
Var ffn(Var x, const FfnVars& w);

Var layer_norm(Var x, Var gamma, Var beta);
// gamma_tb * gamma * (x - mu) / sigma + beta_tb + beta
Var cln(Var x, const ConditionalParams& p, Var gamma, Var beta);
Var apply_norm(Var x, const NormVars& n);

// Key masks for a padded batch. Rows with no items get their first (pad)
// position unmasked so the softmax stays defined; their outputs are zeroed
// afterwards.
Mask self_attention_mask(const SequenceBatch& seq);
Mask cross_attention_mask(const SequenceBatch& seq);

/// One base encoder/decoder stack shared by every (task, behavior) pair.
/// With an injection site, a hypernetwork conditions either the layer norms
/// (ln) or residually modulates the selected weights (qkv, ffn1, ffn2).
///
/// Parameter names start with "tim.".
class ConditionalTransformer {
 public:
  ConditionalTransformer(ParameterStore& store, const TransformerConfig& cfg, std::optional<InjectionSite> site,
                         std::size_t hyper_hidden, std::uint64_t seed);

  TransformerVars base_vars(Tape& tape) const;
  TransformerVars conditioned_vars(Tape& tape, const TypeEmbedding& types, std::size_t task,
                                   std::size_t behavior) const;

  // x: [B, L, d] -> [B, L, d]. `first_attention` may carry a precomputed
  // first-layer MHSA output when the attention weights are unconditioned.
  Var encode(Var x, const SequenceBatch& seq, const TransformerVars& vars, Var first_attention = {}) const;
  Var encoder_first_attention(Var x, const SequenceBatch& seq, const TransformerVars& vars) const;
  // e_item: [B, d] -> [B, d]
  Var decode(Var e_item, Var out_enc, const SequenceBatch& seq, const TransformerVars& vars) const;

  // encode + decode for one (task, behavior) pair. Rows with an empty
  // history produce the zero vector; a batch with no history at all skips
  // attention entirely.
  Var interest(Tape& tape, Var x, Var e_item, const SequenceBatch& seq, const TransformerVars& vars,
               Var first_attention = {}) const;

  // Whether the first encoder attention is identical across pairs.
  bool attention_shared_across_pairs() const noexcept;

  const TransformerConfig& config() const noexcept { return cfg_; }
  bool conditioned() const noexcept { return site_.has_value(); }
  std::optional<InjectionSite> site() const noexcept { return site_; }
  const HyperNet* hyper() const noexcept { return hyper_ ? &*hyper_ : nullptr; }

 private:
  struct LayerParams {
    Parameter *wq, *wk, *wv, *wo;
    Parameter *w1, *b1, *w2, *b2;
    Parameter *g1, *be1, *g2, *be2;
    std::string name;
  };

  LayerParams make_layer(ParameterStore& store, const std::string& name, std::uint64_t seed);
  LayerVars layer_vars(Tape& tape, const LayerParams& p) const;
  void condition_layer(Tape& tape, const LayerParams& p, LayerVars& v, const TypeEmbedding& types,
                       std::size_t task, std::size_t behavior) const;

  TransformerConfig cfg_;
  std::optional<InjectionSite> site_;
  std::optional<HyperNet> hyper_;
  std::vector<LayerParams> enc_;
  std::vector<LayerParams> dec_;
};

/// interest_t = concat(out_dec[t,0], ..., out_dec[t,M-1]) in behavior order.
Var concat_interests(std::span<const Var> per_behavior);

}  // namespace dtrn
