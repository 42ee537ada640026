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

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dtrn/embedding.hpp"
#include "dtrn/layers.hpp"

namespace dtrn {

enum class InjectionSite { ln, qkv, ffn1, ffn2 };

InjectionSite parse_injection_site(std::string_view name);
std::string_view to_string(InjectionSite site);

/// Scale/shift for one layer-norm site under one (task, behavior) pair.
struct ConditionalParams {
  Var gamma;  // [d]
  Var beta;   // [d]
  std::string site;
  std::size_t task = 0;
  std::size_t behavior = 0;
};

/// Multiplicative residual for a base weight: W_eff = W * (1 + delta).
struct ResidualModulation {
  Var delta;  // shaped like the target weight
  std::string target;
};

/// Maps [task_emb ; behavior_emb] (2d inputs) through a two-layer
/// perceptron per generated quantity. Every output layer starts at zero, so a
/// fresh network yields gamma = 1, beta = 0 and delta = 0 for every pair.
///
/// Parameters depend on d, the hidden width and the set of registered sites,
/// never on the number of tasks or behaviors.
class HyperNet {
 public:
  HyperNet(ParameterStore& store, std::string prefix, std::size_t d, std::size_t hidden, std::uint64_t seed);

  void register_ln_site(const std::string& site);
  void register_residual_target(const std::string& target, Shape shape);

  ConditionalParams generate_cln_params(Tape& tape, const TypeEmbedding& types, std::string_view site,
                                        std::size_t task, std::size_t behavior) const;
  ResidualModulation generate_residual_modulation(Tape& tape, const TypeEmbedding& types,
                                                  std::string_view target) const;

  std::vector<std::string> ln_sites() const;
  std::vector<std::string> residual_targets() const;
  std::size_t hidden() const noexcept { return hidden_; }

 private:
  struct LnSite {
    Mlp2 gamma;
    Mlp2 beta;
  };
  struct Target {
    Mlp2 net;
    Shape shape;
  };

  Var input(const TypeEmbedding& types) const;

  ParameterStore* store_;
  std::string prefix_;
  std::size_t d_;
  std::size_t hidden_;
  std::uint64_t seed_;
  std::map<std::string, LnSite, std::less<>> ln_;
  std::map<std::string, Target, std::less<>> targets_;
};

}  // namespace dtrn
