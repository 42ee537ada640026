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

#include "dtrn/optim.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

namespace dtrn {

void adam_step(std::span<Parameter* const> params, const AdamOptions& opts) {
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) throw NumericError("adam_step: non-finite gradient in parameter '" + p->name + "'");
  }
  for (Parameter* p : params) {
    ++p->step_count;
    const Scalar t = static_cast<Scalar>(p->step_count);
    const Scalar corr1 = 1.0 - std::pow(opts.beta1, t);
    const Scalar corr2 = 1.0 - std::pow(opts.beta2, t);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const Scalar g = p->grad[i];
      Scalar& m = p->adam_m[i];
      Scalar& v = p->adam_v[i];
      m = opts.beta1 * m + (1.0 - opts.beta1) * g;
      v = opts.beta2 * v + (1.0 - opts.beta2) * g * g;
      const Scalar m_hat = m / corr1;
      const Scalar v_hat = v / corr2;
      p->value[i] -= opts.lr * m_hat / (std::sqrt(v_hat) + opts.eps);
    }
  }
}

void adam_step(ParameterStore& params, const AdamOptions& opts) {
  std::vector<Parameter*> all;
  for (auto& p : params) all.push_back(&p);
  adam_step(std::span<Parameter* const>(all), opts);
}

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32(std::ostream& os, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw Error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

float get_f32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error("checkpoint truncated");
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | b[i];
  return std::bit_cast<float>(bits);
}

}  // namespace

void save_checkpoint(const ParameterStore& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, 8);
  put_u64(os, params.size());
  for (const auto& p : params) {
    put_u64(os, p.name.size());
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u64(os, p.value.rank());
    for (auto d : p.value.shape()) put_u64(os, d);
    for (Scalar v : p.value.data()) put_f32(os, static_cast<float>(v));
  }
  if (!os) throw Error("failed writing checkpoint: " + path.string());
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw Error("not a DTRN0001 checkpoint: " + path.string());
  }
  const std::uint64_t count = get_u64(is);
  std::vector<NamedTensor> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t name_len = get_u64(is);
    if (name_len > (1u << 20)) throw Error("checkpoint name length implausible");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name_len))) throw Error("checkpoint truncated");
    const std::uint64_t rank = get_u64(is);
    if (rank == 0 || rank > 8) throw Error("checkpoint rank implausible for '" + name + "'");
    Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(get_u64(is));
    std::vector<Scalar> data(numel(shape));
    for (auto& v : data) v = get_f32(is);
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  return out;
}

void load_checkpoint(ParameterStore& params, const std::filesystem::path& path) {
  auto stored = read_checkpoint(path);
  std::unordered_set<std::string> seen;
  for (auto& nt : stored) {
    Parameter* p = params.find(nt.name);
    if (!p) throw Error("checkpoint parameter '" + nt.name + "' is not part of the model");
    if (p->value.shape() != nt.value.shape()) {
      throw DimensionError("checkpoint parameter '" + nt.name + "' has shape " + shape_str(nt.value.shape()) +
                           ", model expects " + shape_str(p->value.shape()));
    }
    p->value = std::move(nt.value);
    seen.insert(nt.name);
  }
  for (const auto& p : params) {
    if (!seen.count(p.name)) throw Error("checkpoint is missing parameter '" + p.name + "'");
  }
}

}  // namespace dtrn
