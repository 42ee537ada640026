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
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dtrn/tensor.hpp"

namespace dtrn {

/// Trainable tensor plus its gradient and Adam moments. All four tensors
/// share one shape.
struct Parameter {
  Parameter(std::string name, Tensor init);

  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::uint64_t step_count = 0;

  void zero_grad() noexcept { grad.fill(0.0); }
};

/// Owns parameters in registration order; addresses are stable.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor init);
  Parameter* find(std::string_view name) noexcept;
  const Parameter* find(std::string_view name) const noexcept;
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;

  void zero_grads() noexcept;
  std::size_t size() const noexcept { return params_.size(); }
  // Total number of scalars, optionally restricted to names with the prefix.
  std::size_t scalar_count(std::string_view prefix = {}) const noexcept;

  auto begin() noexcept { return params_.begin(); }
  auto end() noexcept { return params_.end(); }
  auto begin() const noexcept { return params_.cbegin(); }
  auto end() const noexcept { return params_.cend(); }

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, Parameter*> index_;
};

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const;
  std::uint32_t id() const noexcept { return id_; }
  // Valid until the next node is pushed onto the same tape.
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Records executed operations in order. `backward` walks the record in
/// reverse, which is a reverse topological order because each node is
/// appended after all of its inputs.
///
/// A tape built with `record_gradients = false` keeps only forward values;
/// calling backward on it is an error.
class Tape {
 public:
  // Receives the tape and the gradient flowing into the node being visited.
  using BackwardFn = std::function<void(Tape&, const Tensor&)>;

  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // The same Parameter always maps to the same leaf node on one tape.
  Var param(Parameter& p);

  void backward(Var loss);

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor& value(std::uint32_t id) const;
  // Gradient of the last backward pass; zeros if the node was not reached.
  Tensor grad(Var v) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  std::string_view op_name(std::uint32_t id) const { return nodes_[id].op; }
  const std::vector<std::uint32_t>& last_backward_order() const noexcept { return visit_order_; }

  // Op authoring. `inputs` determine whether the new node needs a gradient.
  Var push(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn, const char* op);
  Var push(Tensor value, std::span<const Var> inputs, BackwardFn fn, const char* op);
  // Gradient buffer of a node, allocated as zeros on first use.
  Tensor& grad_buffer(std::uint32_t id);

 private:
  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;  // parameter leaves read the parameter in place
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    const char* op = "";
    const Tensor& value() const { return ref ? *ref : owned; }
  };

  Var check_and_push(Node node, const char* op);

  bool recording_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> param_nodes_;
  std::vector<std::uint32_t> visit_order_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Shapes must match exactly, except that add/mul
// accept a rank-1 right operand whose length equals the left operand's
// trailing dimension; it is broadcast over every row.
// ---------------------------------------------------------------------------

// a: [..., k] (rank >= 2), b: [k, n] -> [..., n]
Var matmul(Var a, Var b);
// a: [B, m, k]; b: [B, k, n], or [B, n, k] when transpose_b.
Var bmm(Var a, Var b, bool transpose_b = false);

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var add_scalar(Var a, Scalar c);
Var scale(Var a, Scalar c);
Var relu(Var a);
Var sigmoid(Var a);

// Softmax over the trailing axis; masked positions are exactly 0.
Var softmax_masked(Var x, const Mask& mask);
Var softmax(Var x);

// (x - mean) / sqrt(var + eps) over the trailing axis.
Var standardize(Var x);

// table: [K, d] -> [len, d]
Var gather_rows(Var table, std::span<const std::int64_t> indices);

Var reshape(Var x, Shape shape);
Var concat_last(std::span<const Var> parts);
Var slice_last(Var x, std::size_t begin, std::size_t end);

// Zeroes whole leading-axis rows where keep[r] is false; no gradient flows
// through dropped rows.
Var mask_rows(Var x, const std::vector<bool>& keep);

Var sum(Var x);
Var mean(Var x);

// Mean binary cross-entropy from logits, max(o,0) - o*y + log1p(exp(-|o|)).
Var bce_with_logits(Var logits, std::span<const Scalar> labels);

Scalar stable_sigmoid(Scalar x) noexcept;

}  // namespace dtrn
