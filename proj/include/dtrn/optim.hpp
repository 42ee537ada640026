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

#include <filesystem>
#include <string>
#include <vector>

#include "dtrn/autodiff.hpp"

namespace dtrn {

struct AdamOptions {
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

/// Bias-corrected Adam. Every gradient is checked before any parameter is
/// touched, so a non-finite gradient leaves the store unchanged.
void adam_step(ParameterStore& params, const AdamOptions& opts);
void adam_step(std::span<Parameter* const> params, const AdamOptions& opts);

// Checkpoint file: "DTRN0001", u64 count, then per parameter: u64 name
// length, UTF-8 name, u64 rank, u64 dims, f32 row-major data. Little-endian.
inline constexpr char kCheckpointMagic[] = "DTRN0001";

struct NamedTensor {
  std::string name;
  Tensor value;
};

void save_checkpoint(const ParameterStore& params, const std::filesystem::path& path);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);
// Loads by name; every stored parameter must exist with the same shape and
// every parameter in the store must be present in the file.
void load_checkpoint(ParameterStore& params, const std::filesystem::path& path);

}  // namespace dtrn
