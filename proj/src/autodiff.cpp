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

#include "dtrn/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace dtrn {

Parameter::Parameter(std::string n, Tensor init)
    : name(std::move(n)),
      value(std::move(init)),
      grad(value.shape()),
      adam_m(value.shape()),
      adam_v(value.shape()) {}

Parameter& ParameterStore::add(std::string name, Tensor init) {
  if (index_.count(name)) throw Error("duplicate parameter name '" + name + "'");
  auto& p = params_.emplace_back(name, std::move(init));
  index_.emplace(std::move(name), &p);
  return p;
}

Parameter* ParameterStore::find(std::string_view name) noexcept {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(std::string_view name) const noexcept {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : it->second;
}

Parameter& ParameterStore::at(std::string_view name) {
  auto* p = find(name);
  if (!p) throw Error("unknown parameter '" + std::string(name) + "'");
  return *p;
}

const Parameter& ParameterStore::at(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->at(name);
}

void ParameterStore::zero_grads() noexcept {
  for (auto& p : params_) p.zero_grad();
}

std::size_t ParameterStore::scalar_count(std::string_view prefix) const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (std::string_view(p.name).substr(0, prefix.size()) == prefix) n += p.value.size();
  }
  return n;
}

Tape& Var::tape() const {
  if (!tape_) throw Error("use of an unbound Var");
  return *tape_;
}

const Tensor& Var::value() const { return tape().value(id_); }

Var Tape::constant(Tensor value) {
  Node node;
  node.owned = std::move(value);
  node.op = "constant";
  return check_and_push(std::move(node), "constant");
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node node;
  node.ref = &p.value;
  node.param = &p;
  node.requires_grad = recording_;
  node.op = "param";
  Var v = check_and_push(std::move(node), "param");
  param_nodes_.emplace(&p, v.id());
  return v;
}

Var Tape::check_and_push(Node node, const char* op) {
  if (!node.value().all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::push(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn, const char* op) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn), op);
}

Var Tape::push(Tensor value, std::span<const Var> inputs, BackwardFn fn, const char* op) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw Error(std::string(op) + ": input belongs to a different tape");
    needs = needs || nodes_[in.id_].requires_grad;
  }
  Node node;
  node.owned = std::move(value);
  node.op = op;
  node.requires_grad = recording_ && needs;
  if (node.requires_grad) node.backward = std::move(fn);
  return check_and_push(std::move(node), op);
}

const Tensor& Tape::value(std::uint32_t id) const {
  if (id >= nodes_.size()) throw Error("node id out of range");
  return nodes_[id].value();
}

Tensor& Tape::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value().shape(), 0.0);
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  return n.grad.empty() ? Tensor(n.value().shape(), 0.0) : n.grad;
}

void Tape::backward(Var loss) {
  if (!recording_) throw Error("backward on a tape that does not record gradients");
  if (loss.tape_ != this) throw Error("backward: loss was not produced on this tape");
  if (loss.value().size() != 1) {
    throw DimensionError("backward: loss must be a scalar, got " + shape_str(loss.value().shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  visit_order_.clear();
  grad_buffer(loss.id_)[0] = 1.0;
  for (std::int64_t i = loss.id_; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.empty() || !n.requires_grad) continue;
    visit_order_.push_back(static_cast<std::uint32_t>(i));
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) {
      auto dst = n.param->grad.data();
      auto src = n.grad.data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Kernels. All accumulate into C.
// ---------------------------------------------------------------------------
namespace {

using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

auto idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const Scalar* A, const Scalar* B, Scalar* C, std::size_t m, std::size_t k, std::size_t n) {
  MutMap(C, idx(m), idx(n)).noalias() += ConstMap(A, idx(m), idx(k)) * ConstMap(B, idx(k), idx(n));
}

// C[m x n] += A[m x k] * B[n x k]^T
void gemm_nt(const Scalar* A, const Scalar* B, Scalar* C, std::size_t m, std::size_t k, std::size_t n) {
  MutMap(C, idx(m), idx(n)).noalias() += ConstMap(A, idx(m), idx(k)) * ConstMap(B, idx(n), idx(k)).transpose();
}

// C[m x n] += A[k x m]^T * B[k x n]
void gemm_tn(const Scalar* A, const Scalar* B, Scalar* C, std::size_t m, std::size_t k, std::size_t n) {
  MutMap(C, idx(m), idx(n)).noalias() += ConstMap(A, idx(k), idx(m)).transpose() * ConstMap(B, idx(k), idx(n));
}

enum class Broadcast { none, trailing };

Broadcast binary_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (b.rank() == 1 && b.size() == a.cols()) return Broadcast::trailing;
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
}

void accumulate(Tensor& dst, const Tensor& src) {
  Scalar* d = dst.ptr();
  const Scalar* s = src.ptr();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

Scalar stable_sigmoid(Scalar x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (1.0 + e);
}

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() < 2 || B.rank() != 2 || A.cols() != B.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(A.shape()) + " by " + shape_str(B.shape()));
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.dim(1);
  Shape out_shape = A.shape();
  out_shape.back() = n;
  Tensor C(out_shape, 0.0);
  gemm_nn(A.ptr(), B.ptr(), C.ptr(), m, k, n);
  const auto ia = a.id(), ib = b.id();
  return a.tape().push(
      std::move(C), {a, b},
      [ia, ib, m, k, n](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) gemm_nt(g.ptr(), t.value(ib).ptr(), t.grad_buffer(ia).ptr(), m, n, k);
        if (t.requires_grad(ib)) gemm_tn(t.value(ia).ptr(), g.ptr(), t.grad_buffer(ib).ptr(), k, m, n);
      },
      "matmul");
}

Var bmm(Var a, Var b, bool transpose_b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool ok_rank = A.rank() == 3 && B.rank() == 3 && A.dim(0) == B.dim(0);
  const std::size_t inner_b = transpose_b ? (ok_rank ? B.dim(2) : 0) : (ok_rank ? B.dim(1) : 0);
  if (!ok_rank || A.dim(2) != inner_b) {
    throw DimensionError(std::string("bmm: cannot multiply ") + shape_str(A.shape()) + " by " +
                         shape_str(B.shape()) + (transpose_b ? "^T" : ""));
  }
  const std::size_t batch = A.dim(0), m = A.dim(1), k = A.dim(2);
  const std::size_t n = transpose_b ? B.dim(1) : B.dim(2);
  Tensor C({batch, m, n}, 0.0);
  for (std::size_t s = 0; s < batch; ++s) {
    const Scalar* a_s = A.ptr() + s * m * k;
    const Scalar* b_s = B.ptr() + s * k * n;
    Scalar* c_s = C.ptr() + s * m * n;
    if (transpose_b) {
      gemm_nt(a_s, b_s, c_s, m, k, n);
    } else {
      gemm_nn(a_s, b_s, c_s, m, k, n);
    }
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape().push(
      std::move(C), {a, b},
      [ia, ib, batch, m, k, n, transpose_b](Tape& t, const Tensor& g) {
        const bool need_a = t.requires_grad(ia), need_b = t.requires_grad(ib);
        const Scalar* Av = t.value(ia).ptr();
        const Scalar* Bv = t.value(ib).ptr();
        Scalar* dA = need_a ? t.grad_buffer(ia).ptr() : nullptr;
        Scalar* dB = need_b ? t.grad_buffer(ib).ptr() : nullptr;
        for (std::size_t s = 0; s < batch; ++s) {
          const Scalar* g_s = g.ptr() + s * m * n;
          const Scalar* a_s = Av + s * m * k;
          const Scalar* b_s = Bv + s * k * n;
          if (transpose_b) {
            // C = A B^T with B [n x k]
            if (need_a) gemm_nn(g_s, b_s, dA + s * m * k, m, n, k);
            if (need_b) gemm_tn(g_s, a_s, dB + s * k * n, n, m, k);
          } else {
            if (need_a) gemm_nt(g_s, b_s, dA + s * m * k, m, n, k);
            if (need_b) gemm_tn(a_s, g_s, dB + s * k * n, k, m, n);
          }
        }
      },
      "bmm");
}

Var add(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const Broadcast mode = binary_mode(A, B, "add");
  Tensor C = A;
  const std::size_t cols = A.cols();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += mode == Broadcast::none ? B[i] : B[i % cols];
  const auto ia = a.id(), ib = b.id();
  return a.tape().push(
      std::move(C), {a, b},
      [ia, ib, mode, cols](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) accumulate(t.grad_buffer(ia), g);
        if (t.requires_grad(ib)) {
          Tensor& db = t.grad_buffer(ib);
          if (mode == Broadcast::none) {
            accumulate(db, g);
          } else {
            for (std::size_t i = 0; i < g.size(); ++i) db[i % cols] += g[i];
          }
        }
      },
      "add");
}

Var mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const Broadcast mode = binary_mode(A, B, "mul");
  Tensor C = A;
  const std::size_t cols = A.cols();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= mode == Broadcast::none ? B[i] : B[i % cols];
  const auto ia = a.id(), ib = b.id();
  return a.tape().push(
      std::move(C), {a, b},
      [ia, ib, mode, cols](Tape& t, const Tensor& g) {
        const Tensor& Av = t.value(ia);
        const Tensor& Bv = t.value(ib);
        if (t.requires_grad(ia)) {
          Tensor& da = t.grad_buffer(ia);
          for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * (mode == Broadcast::none ? Bv[i] : Bv[i % cols]);
        }
        if (t.requires_grad(ib)) {
          Tensor& db = t.grad_buffer(ib);
          for (std::size_t i = 0; i < g.size(); ++i) db[mode == Broadcast::none ? i : i % cols] += g[i] * Av[i];
        }
      },
      "mul");
}

Var add_scalar(Var a, Scalar c) {
  Tensor C = a.value();
  for (auto& v : C.data()) v += c;
  const auto ia = a.id();
  return a.tape().push(
      std::move(C), {a}, [ia](Tape& t, const Tensor& g) { accumulate(t.grad_buffer(ia), g); }, "add_scalar");
}

Var scale(Var a, Scalar c) {
  Tensor C = a.value();
  for (auto& v : C.data()) v *= c;
  const auto ia = a.id();
  return a.tape().push(
      std::move(C), {a},
      [ia, c](Tape& t, const Tensor& g) {
        Tensor& da = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += c * g[i];
      },
      "scale");
}

Var relu(Var a) {
  Tensor C = a.value();
  for (auto& v : C.data()) v = v > 0.0 ? v : 0.0;
  const auto ia = a.id();
  return a.tape().push(
      std::move(C), {a},
      [ia](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(ia);
        Tensor& da = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x[i] > 0.0) da[i] += g[i];
        }
      },
      "relu");
}

Var sigmoid(Var a) {
  Tensor C = a.value();
  for (auto& v : C.data()) v = stable_sigmoid(v);
  const auto ia = a.id();
  Tape& tape = a.tape();
  const std::uint32_t out_id = static_cast<std::uint32_t>(tape.size());
  return tape.push(
      std::move(C), {a},
      [ia, out_id](Tape& t, const Tensor& g) {
        const Tensor& s = t.value(out_id);
        Tensor& da = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * s[i] * (1.0 - s[i]);
      },
      "sigmoid");
}

namespace {

Var softmax_impl(Var x, const Mask* mask) {
  const Tensor& X = x.value();
  if (mask && mask->shape() != X.shape()) {
    throw DimensionError("softmax_masked: mask " + shape_str(mask->shape()) + " does not match input " +
                         shape_str(X.shape()));
  }
  const std::size_t n = X.cols(), rows = X.rows();
  Tensor P(X.shape(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* xr = X.ptr() + r * n;
    Scalar* pr = P.ptr() + r * n;
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && !(*mask)[r * n + j]) continue;
      mx = std::max(mx, xr[j]);
      any = true;
    }
    if (!any) throw NumericError("softmax_masked: row " + std::to_string(r) + " is fully masked");
    Scalar total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && !(*mask)[r * n + j]) continue;
      pr[j] = std::exp(xr[j] - mx);
      total += pr[j];
    }
    for (std::size_t j = 0; j < n; ++j) pr[j] /= total;
  }
  const auto ix = x.id();
  Tape& tape = x.tape();
  const std::uint32_t out_id = static_cast<std::uint32_t>(tape.size());
  return tape.push(
      std::move(P), {x},
      [ix, out_id, n, rows](Tape& t, const Tensor& g) {
        const Tensor& p = t.value(out_id);
        Tensor& dx = t.grad_buffer(ix);
        for (std::size_t r = 0; r < rows; ++r) {
          const Scalar* pr = p.ptr() + r * n;
          const Scalar* gr = g.ptr() + r * n;
          Scalar dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += pr[j] * gr[j];
          Scalar* dr = dx.ptr() + r * n;
          for (std::size_t j = 0; j < n; ++j) dr[j] += pr[j] * (gr[j] - dot);
        }
      },
      mask ? "softmax_masked" : "softmax");
}

}  // namespace

Var softmax_masked(Var x, const Mask& mask) { return softmax_impl(x, &mask); }
Var softmax(Var x) { return softmax_impl(x, nullptr); }

Var standardize(Var x) {
  const Tensor& X = x.value();
  const std::size_t d = X.cols(), rows = X.rows();
  const LayerNormStats stats = layer_norm_stats(X);
  Tensor Y(X.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar mu = stats.mean[r], sd = stats.stddev[r];
    for (std::size_t j = 0; j < d; ++j) Y[r * d + j] = (X[r * d + j] - mu) / sd;
  }
  const auto ix = x.id();
  Tape& tape = x.tape();
  const std::uint32_t out_id = static_cast<std::uint32_t>(tape.size());
  return tape.push(
      std::move(Y), {x},
      [ix, out_id, d, rows, sd = stats.stddev](Tape& t, const Tensor& g) {
        const Tensor& y = t.value(out_id);
        Tensor& dx = t.grad_buffer(ix);
        const Scalar inv_d = 1.0 / static_cast<Scalar>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const Scalar* yr = y.ptr() + r * d;
          const Scalar* gr = g.ptr() + r * d;
          Scalar g_mean = 0.0, gy_mean = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            g_mean += gr[j];
            gy_mean += gr[j] * yr[j];
          }
          g_mean *= inv_d;
          gy_mean *= inv_d;
          Scalar* dr = dx.ptr() + r * d;
          for (std::size_t j = 0; j < d; ++j) dr[j] += (gr[j] - g_mean - yr[j] * gy_mean) / sd[r];
        }
      },
      "standardize");
}

Var gather_rows(Var table, std::span<const std::int64_t> indices) {
  const Tensor& T = table.value();
  if (T.rank() != 2) throw DimensionError("gather_rows: table must be rank 2, got " + shape_str(T.shape()));
  if (indices.empty()) throw DimensionError("gather_rows: empty index list");
  const std::size_t K = T.dim(0), d = T.dim(1);
  Tensor out({indices.size(), d});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::int64_t idx = indices[i];
    if (idx < 0 || static_cast<std::size_t>(idx) >= K) {
      throw IndexError("gather_rows: index " + std::to_string(idx) + " out of range for table with " +
                       std::to_string(K) + " rows");
    }
    std::copy_n(T.ptr() + static_cast<std::size_t>(idx) * d, d, out.ptr() + i * d);
  }
  const auto it = table.id();
  return table.tape().push(
      std::move(out), {table},
      [it, d, idx = std::vector<std::int64_t>(indices.begin(), indices.end())](Tape& t, const Tensor& g) {
        Tensor& dt = t.grad_buffer(it);
        for (std::size_t i = 0; i < idx.size(); ++i) {
          Scalar* row = dt.ptr() + static_cast<std::size_t>(idx[i]) * d;
          const Scalar* gr = g.ptr() + i * d;
          for (std::size_t j = 0; j < d; ++j) row[j] += gr[j];
        }
      },
      "gather_rows");
}

Var reshape(Var x, Shape shape) {
  Tensor Y = x.value().reshaped(std::move(shape));
  const auto ix = x.id();
  return x.tape().push(
      std::move(Y), {x},
      [ix](Tape& t, const Tensor& g) {
        Tensor& dx = t.grad_buffer(ix);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
      },
      "reshape");
}

Var concat_last(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_last: no inputs");
  const Shape& first = parts[0].value().shape();
  const Shape lead(first.begin(), first.end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Shape& s = p.value().shape();
    if (Shape(s.begin(), s.end() - 1) != lead) {
      throw DimensionError("concat_last: leading shape mismatch " + shape_str(first) + " vs " + shape_str(s));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor Y(out_shape);
  const std::size_t rows = Y.rows();
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& P = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(P.ptr() + r * widths[k], widths[k], Y.ptr() + r * total + offset);
    }
    offset += widths[k];
  }
  std::vector<std::uint32_t> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return parts[0].tape().push(
      std::move(Y), parts,
      [ids, widths, total, rows](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (t.requires_grad(ids[k])) {
            Tensor& dp = t.grad_buffer(ids[k]);
            for (std::size_t r = 0; r < rows; ++r) {
              const Scalar* src = g.ptr() + r * total + off;
              Scalar* dst = dp.ptr() + r * widths[k];
              for (std::size_t j = 0; j < widths[k]; ++j) dst[j] += src[j];
            }
          }
          off += widths[k];
        }
      },
      "concat_last");
}

Var slice_last(Var x, std::size_t begin, std::size_t end) {
  const Tensor& X = x.value();
  const std::size_t cols = X.cols();
  if (begin >= end || end > cols) {
    throw DimensionError("slice_last: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for " + shape_str(X.shape()));
  }
  const std::size_t w = end - begin, rows = X.rows();
  Shape out_shape = X.shape();
  out_shape.back() = w;
  Tensor Y(out_shape);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(X.ptr() + r * cols + begin, w, Y.ptr() + r * w);
  const auto ix = x.id();
  return x.tape().push(
      std::move(Y), {x},
      [ix, begin, w, cols, rows](Tape& t, const Tensor& g) {
        Tensor& dx = t.grad_buffer(ix);
        for (std::size_t r = 0; r < rows; ++r) {
          Scalar* dst = dx.ptr() + r * cols + begin;
          const Scalar* src = g.ptr() + r * w;
          for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
        }
      },
      "slice_last");
}

Var mask_rows(Var x, const std::vector<bool>& keep) {
  const Tensor& X = x.value();
  if (keep.size() != X.dim(0)) {
    throw DimensionError("mask_rows: " + std::to_string(keep.size()) + " flags for " + shape_str(X.shape()));
  }
  const std::size_t stride = X.size() / X.dim(0);
  Tensor Y = X;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    if (!keep[r]) std::fill_n(Y.ptr() + r * stride, stride, 0.0);
  }
  const auto ix = x.id();
  return x.tape().push(
      std::move(Y), {x},
      [ix, keep, stride](Tape& t, const Tensor& g) {
        Tensor& dx = t.grad_buffer(ix);
        for (std::size_t r = 0; r < keep.size(); ++r) {
          if (!keep[r]) continue;
          for (std::size_t j = 0; j < stride; ++j) dx[r * stride + j] += g[r * stride + j];
        }
      },
      "mask_rows");
}

Var sum(Var x) {
  Scalar s = 0.0;
  for (Scalar v : x.value().data()) s += v;
  const auto ix = x.id();
  return x.tape().push(
      Tensor::scalar(s), {x},
      [ix](Tape& t, const Tensor& g) {
        Tensor& dx = t.grad_buffer(ix);
        for (auto& v : dx.data()) v += g[0];
      },
      "sum");
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<Scalar>(x.value().size())); }

Var bce_with_logits(Var logits, std::span<const Scalar> labels) {
  const Tensor& O = logits.value();
  if (O.size() != labels.size()) {
    throw DimensionError("bce_with_logits: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_str(O.shape()));
  }
  const Scalar inv_n = 1.0 / static_cast<Scalar>(O.size());
  Scalar total = 0.0;
  for (std::size_t i = 0; i < O.size(); ++i) {
    const Scalar o = O[i];
    total += std::max(o, 0.0) - o * labels[i] + std::log1p(std::exp(-std::abs(o)));
  }
  const auto io = logits.id();
  return logits.tape().push(
      Tensor::scalar(total * inv_n), {logits},
      [io, inv_n, y = std::vector<Scalar>(labels.begin(), labels.end())](Tape& t, const Tensor& g) {
        const Tensor& o = t.value(io);
        Tensor& d = t.grad_buffer(io);
        for (std::size_t i = 0; i < y.size(); ++i) d[i] += g[0] * (stable_sigmoid(o[i]) - y[i]) * inv_n;
      },
      "bce_with_logits");
}

}  // namespace dtrn
