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

#include "dtrn/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace dtrn {

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    cfg.entries_[std::move(key)] = trim(std::string_view(line).substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

bool KeyValueConfig::has(std::string_view key) const { return entries_.count(std::string(key)) > 0; }

void KeyValueConfig::set(std::string key, std::string value) { entries_[std::move(key)] = std::move(value); }

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.entries_) entries_[k] = v;
}

std::string KeyValueConfig::get_string(std::string_view key) const {
  auto it = entries_.find(std::string(key));
  if (it == entries_.end()) throw ConfigError("missing config key '" + std::string(key) + "'");
  return it->second;
}

std::string KeyValueConfig::get_string(std::string_view key, std::string fallback) const {
  return has(key) ? get_string(key) : fallback;
}

namespace {

template <typename T>
T parse_number(std::string_view key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + text + "' as a number");
  }
  return value;
}

}  // namespace

std::int64_t KeyValueConfig::get_int(std::string_view key) const {
  return parse_number<std::int64_t>(key, get_string(key));
}

std::int64_t KeyValueConfig::get_int(std::string_view key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double KeyValueConfig::get_double(std::string_view key) const { return parse_number<double>(key, get_string(key)); }

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected a boolean, got '" + v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(std::string_view key) const {
  std::vector<double> out;
  for (const auto& part : split(get_string(key), ',')) out.push_back(parse_number<double>(key, part));
  return out;
}

std::vector<double> KeyValueConfig::get_doubles(std::string_view key, std::vector<double> fallback) const {
  return has(key) ? get_doubles(key) : fallback;
}

std::vector<std::vector<double>> KeyValueConfig::get_matrix(std::string_view key) const {
  std::vector<std::vector<double>> rows;
  for (const auto& row : split(get_string(key), ';')) {
    std::vector<double> values;
    for (const auto& part : split(row, ',')) values.push_back(parse_number<double>(key, part));
    rows.push_back(std::move(values));
  }
  return rows;
}

void KeyValueConfig::require_known(const std::set<std::string>& known) const {
  for (const auto& [k, v] : entries_) {
    if (known.count(k)) continue;
    bool matched = false;
    for (const auto& pattern : known) {
      if (!pattern.empty() && pattern.back() == '_' && k.rfind(pattern, 0) == 0) {
        matched = true;
        break;
      }
    }
    if (!matched) throw ConfigError("unknown config key '" + k + "'");
  }
}

std::string KeyValueConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t KeyValueConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace dtrn
