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

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtrn {

// All activations and parameters are held in double precision; checkpoints
// narrow to 32-bit floats on disk.
using Scalar = double;
using Shape = std::vector<std::size_t>;

inline constexpr Scalar kLayerNormEps = 1e-5;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, fully masked softmax rows.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

std::string shape_str(const Shape& shape);
std::size_t numel(const Shape& shape);

/// Dense row-major array. Every dimension is >= 1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = 0.0);
  Tensor(Shape shape, std::vector<Scalar> data);

  static Tensor scalar(Scalar value);
  static Tensor vector(std::vector<Scalar> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<Scalar>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  bool empty() const noexcept { return data_.empty(); }

  // Trailing dimension, and the number of trailing-dimension rows.
  std::size_t cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }
  std::size_t rows() const noexcept { return cols() == 0 ? 0 : data_.size() / cols(); }

  std::span<Scalar> data() noexcept { return data_; }
  std::span<const Scalar> data() const noexcept { return data_; }
  Scalar* ptr() noexcept { return data_.data(); }
  const Scalar* ptr() const noexcept { return data_.data(); }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }

  // Row/column access over the rows() x cols() view.
  Scalar& at(std::size_t row, std::size_t col) { return data_[row * cols() + col]; }
  Scalar at(std::size_t row, std::size_t col) const { return data_[row * cols() + col]; }

  Scalar item() const;
  Tensor reshaped(Shape shape) const;
  bool all_finite() const noexcept;
  void fill(Scalar value) noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) noexcept {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<Scalar> data_;
};

Scalar max_abs_diff(const Tensor& a, const Tensor& b);

/// Boolean tensor; `true` keeps a position.
class Mask {
 public:
  Mask() = default;
  Mask(Shape shape, bool fill);
  Mask(Shape shape, std::vector<std::uint8_t> keep);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return keep_.size(); }
  bool operator[](std::size_t i) const { return keep_[i] != 0; }
  void set(std::size_t i, bool keep) { keep_[i] = keep ? 1 : 0; }
  std::span<const std::uint8_t> values() const noexcept { return keep_; }

 private:
  Shape shape_;
  std::vector<std::uint8_t> keep_;
};

struct LayerNormStats {
  Tensor mean;    // shape = input shape without the trailing axis ([1] for rank-1 input)
  Tensor stddev;  // sqrt(population variance + eps)
};

LayerNormStats layer_norm_stats(const Tensor& x, Scalar eps = kLayerNormEps);

}  // namespace dtrn
