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

#include "dtrn/layers.hpp"

#include <cmath>
#include <random>

namespace dtrn {

std::uint64_t parameter_stream_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // splitmix64 finalizer over the combined value
  std::uint64_t z = h ^ (seed + 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Tensor uniform_tensor(Shape shape, Scalar bound, std::uint64_t stream_seed) {
  std::mt19937_64 rng(stream_seed);
  std::uniform_real_distribution<Scalar> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               std::uint64_t seed, Init init)
    : in_(in), out_(out) {
  const std::string wname = name + ".w";
  Tensor w = init == Init::zeros
                 ? Tensor({in, out}, 0.0)
                 : uniform_tensor({in, out}, std::sqrt(6.0 / static_cast<Scalar>(in + out)),
                                  parameter_stream_seed(seed, wname));
  w_ = &store.add(wname, std::move(w));
  b_ = &store.add(name + ".b", Tensor({out}, 0.0));
}

Var Linear::forward(Tape& tape, Var x) const { return add(matmul(x, tape.param(*w_)), tape.param(*b_)); }

Var activate(Var x, Activation act) {
  switch (act) {
    case Activation::relu:
      return relu(x);
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::none:
      break;
  }
  return x;
}

Mlp2::Mlp2(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
           std::uint64_t seed, Activation out_act, Init out_init)
    : l1_(store, name + ".l1", in, hidden, seed),
      l2_(store, name + ".l2", hidden, out, seed, out_init),
      out_act_(out_act) {}

Var Mlp2::forward(Tape& tape, Var x) const {
  return activate(l2_.forward(tape, relu(l1_.forward(tape, x))), out_act_);
}

}  // namespace dtrn
