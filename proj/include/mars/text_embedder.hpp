// Copyright 2026 The mars-context Authors
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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "mars/error.hpp"
#include "mars/rng.hpp"
#include "mars/text.hpp"
#include "mars/types.hpp"

namespace mars {

// Sentence embedder used for text retrieval similarity. Implementations are
// immutable after construction and deterministic for a fixed id().
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;

  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;

  // `utt` is passed when the text is a stored hypothesis so adapters can key
  // on it and errors can name it.
  virtual std::vector<double> embed(std::string_view text, const UtteranceId* utt = nullptr) const = 0;
};

inline std::vector<double> embed_text(const TextEmbedder& embedder, std::string_view text,
                                      const UtteranceId* utt = nullptr) {
  std::vector<double> v = embedder.embed(text, utt);
  const std::string who = utt ? " for " + utt->str() : std::string();
  if (v.size() != embedder.dim()) {
    throw EmbeddingError("embedder " + embedder.id() + " returned " + std::to_string(v.size()) +
                         " values, expected " + std::to_string(embedder.dim()) + who);
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw EmbeddingError("embedder " + embedder.id() + " returned a non-finite value" + who);
  }
  return v;
}

inline constexpr std::uint64_t kNgramHashSeed = 0x4d4152534e47ULL;
inline constexpr std::size_t kDefaultTextDim = 256;

// Lowercased character 3-grams (text padded with one space each side),
// hashed into `dim` buckets with seeded FNV-1a, then L2-normalised.
// Text shorter than one character embeds to the zero vector.
inline std::vector<double> reference_ngram_embed(std::string_view input, std::size_t dim) {
  if (dim < 16) throw ConfigError("reference embedder dimension must be at least 16");
  std::vector<double> v(dim, 0.0);
  if (input.empty()) return v;
  std::u32string cps = U" " + text::lowercase(text::decode_utf8(input)) + U" ";
  std::string gram;
  for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
    gram.clear();
    for (std::size_t k = 0; k < 3; ++k) text::append_utf8(gram, cps[i + k]);
    v[fnv1a64(gram, kNgramHashSeed) % dim] += 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

class ReferenceNgramEmbedder final : public TextEmbedder {
 public:
  explicit ReferenceNgramEmbedder(std::size_t dim = kDefaultTextDim) : dim_(dim) {
    if (dim_ < 16) throw ConfigError("reference embedder dimension must be at least 16");
  }

  std::string id() const override { return "ngram3-fnv1a64-e" + std::to_string(dim_); }
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(std::string_view text, const UtteranceId*) const override {
    return reference_ngram_embed(text, dim_);
  }

 private:
  std::size_t dim_;
};

// Lookup table of offline vectors. Keys are either the exact hypothesis text
// or "conversation#index"; the id form wins when both are present.
class PrecomputedEmbedder final : public TextEmbedder {
 public:
  PrecomputedEmbedder(std::string id, std::unordered_map<std::string, std::vector<double>> table)
      : id_(std::move(id)), table_(std::move(table)) {
    if (table_.empty()) throw FormatError("precomputed vector table is empty");
    dim_ = table_.begin()->second.size();
    if (dim_ == 0) throw FormatError("precomputed vectors have dimension 0");
    for (const auto& [key, vec] : table_) {
      if (vec.size() != dim_) {
        throw FormatError("precomputed vector for '" + key + "' has dimension " + std::to_string(vec.size()) +
                          ", expected " + std::to_string(dim_));
      }
    }
  }

  std::string id() const override { return id_; }
  std::size_t dim() const override { return dim_; }

  std::vector<double> embed(std::string_view text, const UtteranceId* utt) const override {
    if (utt) {
      if (auto it = table_.find(utt->str()); it != table_.end()) return it->second;
    }
    if (auto it = table_.find(std::string(text)); it != table_.end()) return it->second;
    throw EmbeddingError("no precomputed vector for " +
                         (utt ? utt->str() : "text '" + std::string(text) + "'"));
  }

 private:
  std::string id_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;
};

// Reads line-delimited {"key": ..., "vector": [...]} records.
inline std::unique_ptr<TextEmbedder> load_precomputed_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open precomputed vector file " + path.string());
  std::unordered_map<std::string, std::vector<double>> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto key = j.at("key").get<std::string>();
      auto vec = j.at("vector").get<std::vector<double>>();
      table[std::move(key)] = std::move(vec);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return std::make_unique<PrecomputedEmbedder>("precomputed:" + path.filename().string(), std::move(table));
}

}  // namespace mars
