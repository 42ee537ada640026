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

#include "dtrn/hypernet.hpp"

namespace dtrn {

InjectionSite parse_injection_site(std::string_view name) {
  if (name == "ln") return InjectionSite::ln;
  if (name == "qkv") return InjectionSite::qkv;
  if (name == "ffn1") return InjectionSite::ffn1;
  if (name == "ffn2") return InjectionSite::ffn2;
  throw ConfigError("unknown injection_site '" + std::string(name) + "' (expected ln, qkv, ffn1 or ffn2)");
}

std::string_view to_string(InjectionSite site) {
  switch (site) {
    case InjectionSite::ln:
      return "ln";
    case InjectionSite::qkv:
      return "qkv";
    case InjectionSite::ffn1:
      return "ffn1";
    case InjectionSite::ffn2:
      return "ffn2";
  }
  return "?";
}

HyperNet::HyperNet(ParameterStore& store, std::string prefix, std::size_t d, std::size_t hidden, std::uint64_t seed)
    : store_(&store), prefix_(std::move(prefix)), d_(d), hidden_(hidden), seed_(seed) {
  if (d_ == 0 || hidden_ == 0) throw ConfigError("hypernetwork needs d >= 1 and hidden >= 1");
}

void HyperNet::register_ln_site(const std::string& site) {
  if (ln_.count(site)) throw ConfigError("layer-norm site '" + site + "' registered twice");
  const std::string base = prefix_ + "." + site;
  ln_.emplace(site, LnSite{Mlp2(*store_, base + ".gamma", 2 * d_, hidden_, d_, seed_, Activation::none, Init::zeros),
                           Mlp2(*store_, base + ".beta", 2 * d_, hidden_, d_, seed_, Activation::none, Init::zeros)});
}

void HyperNet::register_residual_target(const std::string& target, Shape shape) {
  if (targets_.count(target)) throw ConfigError("residual target '" + target + "' registered twice");
  const std::size_t n = numel(shape);
  targets_.emplace(target, Target{Mlp2(*store_, prefix_ + "." + target, 2 * d_, hidden_, n, seed_,
                                       Activation::none, Init::zeros),
                                  std::move(shape)});
}

Var HyperNet::input(const TypeEmbedding& types) const {
  const Var parts[] = {types.task, types.behavior};
  return reshape(concat_last(parts), {1, 2 * d_});
}

ConditionalParams HyperNet::generate_cln_params(Tape& tape, const TypeEmbedding& types, std::string_view site,
                                                std::size_t task, std::size_t behavior) const {
  auto it = ln_.find(site);
  if (it == ln_.end()) throw ConfigError("unregistered layer-norm site '" + std::string(site) + "'");
  const Var x = input(types);
  ConditionalParams out;
  out.gamma = add_scalar(reshape(it->second.gamma.forward(tape, x), {d_}), 1.0);
  out.beta = reshape(it->second.beta.forward(tape, x), {d_});
  out.site = std::string(site);
  out.task = task;
  out.behavior = behavior;
  return out;
}

ResidualModulation HyperNet::generate_residual_modulation(Tape& tape, const TypeEmbedding& types,
                                                          std::string_view target) const {
  auto it = targets_.find(target);
  if (it == targets_.end()) throw ConfigError("unregistered residual target '" + std::string(target) + "'");
  const Var x = input(types);
  return {reshape(it->second.net.forward(tape, x), it->second.shape), std::string(target)};
}

std::vector<std::string> HyperNet::ln_sites() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : ln_) out.push_back(k);
  return out;
}

std::vector<std::string> HyperNet::residual_targets() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : targets_) out.push_back(k);
  return out;
}

}  // namespace dtrn
