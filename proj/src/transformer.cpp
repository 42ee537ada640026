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

#include "dtrn/transformer.hpp"

#include <algorithm>
#include <cmath>

namespace dtrn {

void TransformerConfig::validate() const {
  if (d == 0 || heads == 0 || d_f == 0) throw ConfigError("transformer needs d, heads and d_f >= 1");
  if (d % heads != 0) {
    throw ConfigError("model dim " + std::to_string(d) + " is not divisible by " + std::to_string(heads) + " heads");
  }
  if (enc_layers == 0 || dec_layers == 0) throw ConfigError("transformer needs at least one encoder and decoder layer");
}

Var attention(Var q_src, Var kv_src, const Mask& mask, const AttentionVars& w, std::size_t heads) {
  const Shape& qs = q_src.shape();
  const Shape& ks = kv_src.shape();
  if (qs.size() != 3 || ks.size() != 3 || qs[0] != ks[0] || qs[2] != ks[2]) {
    throw DimensionError("attention: incompatible query " + shape_str(qs) + " and key/value " + shape_str(ks));
  }
  const std::size_t d = qs[2];
  if (heads == 0 || d % heads != 0) throw DimensionError("attention: dim not divisible by head count");
  const std::size_t dp = d / heads;
  const Scalar inv_sqrt = 1.0 / std::sqrt(static_cast<Scalar>(dp));

  const Var q = matmul(q_src, w.wq);
  const Var k = matmul(kv_src, w.wk);
  const Var v = matmul(kv_src, w.wv);
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Var qh = heads == 1 ? q : slice_last(q, h * dp, (h + 1) * dp);
    const Var kh = heads == 1 ? k : slice_last(k, h * dp, (h + 1) * dp);
    const Var vh = heads == 1 ? v : slice_last(v, h * dp, (h + 1) * dp);
    const Var scores = scale(bmm(qh, kh, /*transpose_b=*/true), inv_sqrt);
    outs.push_back(bmm(softmax_masked(scores, mask), vh));
  }
  const Var joined = heads == 1 ? outs[0] : concat_last(outs);
  return matmul(joined, w.wo);
}

Var mhsa(Var x, const Mask& mask, const AttentionVars& w, std::size_t heads) {
  return attention(x, x, mask, w, heads);
}

Var mha_decode(Var q_src, Var kv_src, const Mask& mask, const AttentionVars& w, std::size_t heads) {
  return attention(q_src, kv_src, mask, w, heads);
}

Var ffn(Var x, const FfnVars& w) { return add(matmul(relu(add(matmul(x, w.w1), w.b1)), w.w2), w.b2); }

Var layer_norm(Var x, Var gamma, Var beta) { return add(mul(standardize(x), gamma), beta); }

Var cln(Var x, const ConditionalParams& p, Var gamma, Var beta) {
  return add(mul(standardize(x), mul(p.gamma, gamma)), add(p.beta, beta));
}

Var apply_norm(Var x, const NormVars& n) {
  return n.cond ? cln(x, *n.cond, n.gamma, n.beta) : layer_norm(x, n.gamma, n.beta);
}

Mask self_attention_mask(const SequenceBatch& seq) {
  const std::size_t L = seq.max_len;
  Mask m({seq.batch, L, L}, false);
  for (std::size_t r = 0; r < seq.batch; ++r) {
    const std::size_t valid = std::max<std::size_t>(seq.lengths[r], 1);
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < valid; ++j) m.set((r * L + i) * L + j, true);
    }
  }
  return m;
}

Mask cross_attention_mask(const SequenceBatch& seq) {
  const std::size_t L = seq.max_len;
  Mask m({seq.batch, 1, L}, false);
  for (std::size_t r = 0; r < seq.batch; ++r) {
    const std::size_t valid = std::max<std::size_t>(seq.lengths[r], 1);
    for (std::size_t j = 0; j < valid; ++j) m.set(r * L + j, true);
  }
  return m;
}

ConditionalTransformer::ConditionalTransformer(ParameterStore& store, const TransformerConfig& cfg,
                                               std::optional<InjectionSite> site, std::size_t hyper_hidden,
                                               std::uint64_t seed)
    : cfg_(cfg), site_(site) {
  cfg_.validate();
  for (std::size_t l = 0; l < cfg_.enc_layers; ++l) enc_.push_back(make_layer(store, "enc" + std::to_string(l), seed));
  for (std::size_t l = 0; l < cfg_.dec_layers; ++l) dec_.push_back(make_layer(store, "dec" + std::to_string(l), seed));
  if (!site_) return;

  hyper_.emplace(store, "tim.hyper", cfg_.d, hyper_hidden, seed);
  const std::size_t d = cfg_.d, df = cfg_.d_f;
  auto register_layer = [&](const LayerParams& p) {
    switch (*site_) {
      case InjectionSite::ln:
        hyper_->register_ln_site(p.name + ".ln1");
        hyper_->register_ln_site(p.name + ".ln2");
        break;
      case InjectionSite::qkv:
        hyper_->register_residual_target(p.name + ".attn.wq", {d, d});
        hyper_->register_residual_target(p.name + ".attn.wk", {d, d});
        hyper_->register_residual_target(p.name + ".attn.wv", {d, d});
        break;
      case InjectionSite::ffn1:
        hyper_->register_residual_target(p.name + ".ffn.w1", {d, df});
        hyper_->register_residual_target(p.name + ".ffn.b1", {df});
        break;
      case InjectionSite::ffn2:
        hyper_->register_residual_target(p.name + ".ffn.w2", {df, d});
        hyper_->register_residual_target(p.name + ".ffn.b2", {d});
        break;
    }
  };
  for (const auto& p : enc_) register_layer(p);
  for (const auto& p : dec_) register_layer(p);
}

ConditionalTransformer::LayerParams ConditionalTransformer::make_layer(ParameterStore& store, const std::string& name,
                                                                       std::uint64_t seed) {
  const std::size_t d = cfg_.d, df = cfg_.d_f;
  const std::string base = "tim." + name;
  auto glorot = [&](const std::string& n, std::size_t in, std::size_t out) {
    return &store.add(n, uniform_tensor({in, out}, std::sqrt(6.0 / static_cast<Scalar>(in + out)),
                                        parameter_stream_seed(seed, n)));
  };
  LayerParams p;
  p.name = name;
  p.wq = glorot(base + ".attn.wq", d, d);
  p.wk = glorot(base + ".attn.wk", d, d);
  p.wv = glorot(base + ".attn.wv", d, d);
  p.wo = glorot(base + ".attn.wo", d, d);
  p.w1 = glorot(base + ".ffn.w1", d, df);
  p.b1 = &store.add(base + ".ffn.b1", Tensor({df}, 0.0));
  p.w2 = glorot(base + ".ffn.w2", df, d);
  p.b2 = &store.add(base + ".ffn.b2", Tensor({d}, 0.0));
  p.g1 = &store.add(base + ".ln1.gamma", Tensor({d}, 1.0));
  p.be1 = &store.add(base + ".ln1.beta", Tensor({d}, 0.0));
  p.g2 = &store.add(base + ".ln2.gamma", Tensor({d}, 1.0));
  p.be2 = &store.add(base + ".ln2.beta", Tensor({d}, 0.0));
  return p;
}

LayerVars ConditionalTransformer::layer_vars(Tape& tape, const LayerParams& p) const {
  LayerVars v;
  v.attn = {tape.param(*p.wq), tape.param(*p.wk), tape.param(*p.wv), tape.param(*p.wo)};
  v.ffn = {tape.param(*p.w1), tape.param(*p.b1), tape.param(*p.w2), tape.param(*p.b2)};
  v.ln1 = {tape.param(*p.g1), tape.param(*p.be1), std::nullopt};
  v.ln2 = {tape.param(*p.g2), tape.param(*p.be2), std::nullopt};
  return v;
}

TransformerVars ConditionalTransformer::base_vars(Tape& tape) const {
  TransformerVars out;
  for (const auto& p : enc_) out.enc.push_back(layer_vars(tape, p));
  for (const auto& p : dec_) out.dec.push_back(layer_vars(tape, p));
  return out;
}

void ConditionalTransformer::condition_layer(Tape& tape, const LayerParams& p, LayerVars& v,
                                             const TypeEmbedding& types, std::size_t task,
                                             std::size_t behavior) const {
  auto modulate = [&](Var base, const std::string& target) {
    const auto mod = hyper_->generate_residual_modulation(tape, types, p.name + target);
    return mul(base, add_scalar(mod.delta, 1.0));
  };
  switch (*site_) {
    case InjectionSite::ln:
      v.ln1.cond = hyper_->generate_cln_params(tape, types, p.name + ".ln1", task, behavior);
      v.ln2.cond = hyper_->generate_cln_params(tape, types, p.name + ".ln2", task, behavior);
      break;
    case InjectionSite::qkv:
      v.attn.wq = modulate(v.attn.wq, ".attn.wq");
      v.attn.wk = modulate(v.attn.wk, ".attn.wk");
      v.attn.wv = modulate(v.attn.wv, ".attn.wv");
      break;
    case InjectionSite::ffn1:
      v.ffn.w1 = modulate(v.ffn.w1, ".ffn.w1");
      v.ffn.b1 = modulate(v.ffn.b1, ".ffn.b1");
      break;
    case InjectionSite::ffn2:
      v.ffn.w2 = modulate(v.ffn.w2, ".ffn.w2");
      v.ffn.b2 = modulate(v.ffn.b2, ".ffn.b2");
      break;
  }
}

TransformerVars ConditionalTransformer::conditioned_vars(Tape& tape, const TypeEmbedding& types, std::size_t task,
                                                         std::size_t behavior) const {
  TransformerVars out = base_vars(tape);
  if (!site_) return out;
  for (std::size_t l = 0; l < enc_.size(); ++l) condition_layer(tape, enc_[l], out.enc[l], types, task, behavior);
  for (std::size_t l = 0; l < dec_.size(); ++l) condition_layer(tape, dec_[l], out.dec[l], types, task, behavior);
  return out;
}

bool ConditionalTransformer::attention_shared_across_pairs() const noexcept {
  return !site_ || *site_ != InjectionSite::qkv;
}

Var ConditionalTransformer::encoder_first_attention(Var x, const SequenceBatch& seq,
                                                    const TransformerVars& vars) const {
  return mhsa(x, self_attention_mask(seq), vars.enc.at(0).attn, cfg_.heads);
}

Var ConditionalTransformer::encode(Var x, const SequenceBatch& seq, const TransformerVars& vars,
                                   Var first_attention) const {
  const Shape& s = x.shape();
  if (s.size() != 3 || s[0] != seq.batch || s[1] != seq.max_len || s[2] != cfg_.d) {
    throw DimensionError("encode: input " + shape_str(s) + " does not match the sequence batch");
  }
  const Mask mask = self_attention_mask(seq);
  Var h = x;
  for (std::size_t l = 0; l < vars.enc.size(); ++l) {
    const LayerVars& lv = vars.enc[l];
    const Var attn = (l == 0 && first_attention.valid()) ? first_attention : mhsa(h, mask, lv.attn, cfg_.heads);
    const Var out0 = apply_norm(add(h, attn), lv.ln1);
    h = apply_norm(add(out0, ffn(out0, lv.ffn)), lv.ln2);
  }
  return h;
}

Var ConditionalTransformer::decode(Var e_item, Var out_enc, const SequenceBatch& seq,
                                   const TransformerVars& vars) const {
  const std::size_t B = seq.batch, d = cfg_.d;
  if (e_item.shape() != Shape{B, d}) {
    throw DimensionError("decode: target embedding " + shape_str(e_item.shape()) + ", expected " +
                         shape_str({B, d}));
  }
  const Mask mask = cross_attention_mask(seq);
  Var q = reshape(e_item, {B, 1, d});
  for (const LayerVars& lv : vars.dec) {
    const Var out3 = apply_norm(add(q, mha_decode(q, out_enc, mask, lv.attn, cfg_.heads)), lv.ln1);
    q = apply_norm(add(out3, ffn(out3, lv.ffn)), lv.ln2);
  }
  return reshape(q, {B, d});
}

Var ConditionalTransformer::interest(Tape& tape, Var x, Var e_item, const SequenceBatch& seq,
                                     const TransformerVars& vars, Var first_attention) const {
  if (!seq.any_nonempty()) return tape.constant(Tensor({seq.batch, cfg_.d}, 0.0));
  const Var enc = encode(x, seq, vars, first_attention);
  const Var dec = decode(e_item, enc, seq, vars);
  const auto keep = seq.nonempty_rows();
  const bool all = std::all_of(keep.begin(), keep.end(), [](bool k) { return k; });
  return all ? dec : mask_rows(dec, keep);
}

Var concat_interests(std::span<const Var> per_behavior) { return concat_last(per_behavior); }

}  // namespace dtrn
