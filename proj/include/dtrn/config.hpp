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
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dtrn/tensor.hpp"

namespace dtrn {

/// Flat `key=value` text. Blank lines and lines starting with '#' are
/// ignored; whitespace around keys and values is trimmed.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  void set(std::string key, std::string value);
  // Later values win.
  void merge(const KeyValueConfig& other);

  std::string get_string(std::string_view key) const;
  std::string get_string(std::string_view key, std::string fallback) const;
  std::int64_t get_int(std::string_view key) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  double get_double(std::string_view key) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::vector<double> get_doubles(std::string_view key) const;
  std::vector<double> get_doubles(std::string_view key, std::vector<double> fallback) const;
  // Matrix written as rows separated by ';', values by ','.
  std::vector<std::vector<double>> get_matrix(std::string_view key) const;

  // Throws ConfigError naming the first key not in `known` (prefix entries
  // ending in '_' match any key starting with them).
  void require_known(const std::set<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
  std::string to_text() const;
  // FNV-1a over the canonical (sorted) text.
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> entries_;
};

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

}  // namespace dtrn
