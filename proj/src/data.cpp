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

#include "dtrn/data.hpp"

#include <fstream>
#include <json.hpp>

namespace dtrn {

void FeatureSchema::validate() const {
  if (n_sparse < 1 || n_seqs < 1 || n_tasks < 1 || dim < 1) {
    throw ConfigError("schema requires n_sparse, n_seqs, n_tasks and dim >= 1");
  }
  if (sparse_vocab.size() != n_sparse) throw ConfigError("schema: expected " + std::to_string(n_sparse) + " vocab_i");
  if (seq_vocab.size() != n_seqs || max_len.size() != n_seqs) {
    throw ConfigError("schema: expected " + std::to_string(n_seqs) + " seq_vocab_i and max_len_i");
  }
  for (std::size_t i = 0; i < n_sparse; ++i) {
    if (sparse_vocab[i] < 1) throw ConfigError("schema: vocab_" + std::to_string(i) + " must be >= 1");
  }
  for (std::size_t b = 0; b < n_seqs; ++b) {
    // one pad row plus at least one real item
    if (seq_vocab[b] < 2) throw ConfigError("schema: seq_vocab_" + std::to_string(b) + " must be >= 2");
    if (max_len[b] < 1) throw ConfigError("schema: max_len_" + std::to_string(b) + " must be >= 1");
  }
}

FeatureSchema FeatureSchema::from_config(const KeyValueConfig& cfg) {
  FeatureSchema s;
  auto positive = [&](std::string_view key) {
    const auto v = cfg.get_int(key);
    if (v < 1) throw ConfigError("schema key '" + std::string(key) + "' must be >= 1");
    return static_cast<std::size_t>(v);
  };
  s.n_sparse = positive("n_sparse");
  s.n_seqs = positive("n_seqs");
  s.n_tasks = positive("n_tasks");
  s.dim = positive("dim");
  for (std::size_t i = 0; i < s.n_sparse; ++i) s.sparse_vocab.push_back(positive("vocab_" + std::to_string(i)));
  for (std::size_t b = 0; b < s.n_seqs; ++b) {
    s.seq_vocab.push_back(positive("seq_vocab_" + std::to_string(b)));
    s.max_len.push_back(positive("max_len_" + std::to_string(b)));
  }
  s.validate();
  return s;
}

FeatureSchema FeatureSchema::load(const std::filesystem::path& path) {
  const KeyValueConfig cfg = KeyValueConfig::load(path);
  cfg.require_known({"n_sparse", "n_seqs", "n_tasks", "dim", "vocab_", "seq_vocab_", "max_len_"});
  return from_config(cfg);
}

KeyValueConfig FeatureSchema::to_config() const {
  KeyValueConfig cfg;
  cfg.set("n_sparse", std::to_string(n_sparse));
  cfg.set("n_seqs", std::to_string(n_seqs));
  cfg.set("n_tasks", std::to_string(n_tasks));
  cfg.set("dim", std::to_string(dim));
  for (std::size_t i = 0; i < n_sparse; ++i) cfg.set("vocab_" + std::to_string(i), std::to_string(sparse_vocab[i]));
  for (std::size_t b = 0; b < n_seqs; ++b) {
    cfg.set("seq_vocab_" + std::to_string(b), std::to_string(seq_vocab[b]));
    cfg.set("max_len_" + std::to_string(b), std::to_string(max_len[b]));
  }
  return cfg;
}

void FeatureSchema::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write schema: " + path.string());
  os << to_config().to_text();
}

void validate_instance(const Instance& inst, const FeatureSchema& schema) {
  if (inst.sparse.size() != schema.n_sparse) {
    throw IndexError("instance has " + std::to_string(inst.sparse.size()) + " sparse ids, schema expects " +
                     std::to_string(schema.n_sparse));
  }
  if (inst.seqs.size() != schema.n_seqs) {
    throw IndexError("instance has " + std::to_string(inst.seqs.size()) + " sequences, schema expects " +
                     std::to_string(schema.n_seqs));
  }
  if (inst.labels.size() != schema.n_tasks) {
    throw IndexError("instance has " + std::to_string(inst.labels.size()) + " labels, schema expects " +
                     std::to_string(schema.n_tasks));
  }
  for (std::size_t i = 0; i < schema.n_sparse; ++i) {
    const auto id = inst.sparse[i];
    if (id < 0 || static_cast<std::size_t>(id) >= schema.sparse_vocab[i]) {
      throw IndexError("sparse feature " + std::to_string(i) + " id " + std::to_string(id) + " outside [0, " +
                       std::to_string(schema.sparse_vocab[i]) + ")");
    }
  }
  for (std::size_t b = 0; b < schema.n_seqs; ++b) {
    for (auto id : inst.seqs[b]) {
      if (id < 1 || static_cast<std::size_t>(id) >= schema.seq_vocab[b]) {
        throw IndexError("sequence " + std::to_string(b) + " id " + std::to_string(id) + " outside [1, " +
                         std::to_string(schema.seq_vocab[b]) + ")");
      }
    }
    if (inst.target < 1 || static_cast<std::size_t>(inst.target) >= schema.seq_vocab[b]) {
      throw IndexError("target id " + std::to_string(inst.target) + " outside sequence " + std::to_string(b) +
                       " vocabulary");
    }
  }
  for (int y : inst.labels) {
    if (y != 0 && y != 1) throw IndexError("label " + std::to_string(y) + " is not binary");
  }
}

std::string instance_to_json(const Instance& inst) {
  nlohmann::json j;
  j["sparse"] = inst.sparse;
  j["seqs"] = inst.seqs;
  j["labels"] = inst.labels;
  j["target"] = inst.target;
  return j.dump();
}

Instance instance_from_json(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    Instance inst;
    inst.sparse = j.at("sparse").get<std::vector<std::int64_t>>();
    inst.seqs = j.at("seqs").get<std::vector<std::vector<std::int64_t>>>();
    inst.labels = j.at("labels").get<std::vector<int>>();
    inst.target = j.at("target").get<std::int64_t>();
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed dataset line: ") + e.what());
  }
}

void write_dataset(const std::filesystem::path& path, std::span<const Instance> data) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write dataset: " + path.string());
  for (const auto& inst : data) os << instance_to_json(inst) << '\n';
  if (!os) throw Error("failed writing dataset: " + path.string());
}

std::vector<Instance> read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open dataset: " + path.string());
  std::vector<Instance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(instance_from_json(line));
    } catch (const Error& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Instance> read_dataset(const std::filesystem::path& path, const FeatureSchema& schema) {
  auto data = read_dataset(path);
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      validate_instance(data[i], schema);
    } catch (const Error& e) {
      throw IndexError(path.string() + ": instance " + std::to_string(i) + ": " + e.what());
    }
  }
  return data;
}

}  // namespace dtrn
