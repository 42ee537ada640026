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

#include <cstdint>
#include <string>
#include <string_view>

#include "dtrn/autodiff.hpp"

namespace dtrn {

// Each parameter draws its initial values from its own stream, keyed by the
// model seed and the parameter name. Adding or removing a parameter never
// shifts the initialization of any other.
std::uint64_t parameter_stream_seed(std::uint64_t seed, std::string_view name);
Tensor uniform_tensor(Shape shape, Scalar bound, std::uint64_t stream_seed);

enum class Init { glorot, zeros };

/// y = x W + b, W: [in, out], b: [out].
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, std::uint64_t seed,
         Init init = Init::glorot);

  Var forward(Tape& tape, Var x) const;
  std::size_t in() const noexcept { return in_; }
  std::size_t out() const noexcept { return out_; }
  Parameter& weight() const { return *w_; }
  Parameter& bias() const { return *b_; }

 private:
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

enum class Activation { none, relu, sigmoid };

Var activate(Var x, Activation act);

/// Two-layer perceptron: in -> hidden (ReLU) -> out (configurable activation).
class Mlp2 {
 public:
  Mlp2() = default;
  Mlp2(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
       std::uint64_t seed, Activation out_act, Init out_init = Init::glorot);

  Var forward(Tape& tape, Var x) const;
  const Linear& first() const noexcept { return l1_; }
  const Linear& second() const noexcept { return l2_; }

 private:
  Linear l1_;
  Linear l2_;
  Activation out_act_ = Activation::none;
};

}  // namespace dtrn
