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

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "mars/embedding_io.hpp"
#include "mars/error.hpp"
#include "mars/rng.hpp"
#include "mars/similarity.hpp"
#include "mars/text_embedder.hpp"
#include "mars/types.hpp"

namespace mars {

inline constexpr int kDatabaseFormatVersion = 1;

// One line of a conversation manifest.
struct ManifestRow {
  std::string conversation_id;
  std::uint64_t index = 0;
  std::string language;
  std::string hypothesis;
  std::optional<std::string> reference;
  std::string embedding_path;  // relative to the manifest's directory

  UtteranceId id() const { return {conversation_id, index}; }
};

// The stored triplet (id, speech embedding, hypothesis) plus cached vectors.
struct ContextRecord {
  UtteranceId id;
  SpeechEmbedding speech;
  std::string hypothesis;
  std::vector<double> pooled;    // mean_pool(speech)
  std::vector<double> text_vec;  // embedder output on hypothesis
  std::string language;
  std::optional<std::string> reference;
  std::filesystem::path embedding_path;
};

struct DatabaseMetadata {
  int format_version = kDatabaseFormatVersion;
  std::string embedder_id;
  std::size_t speech_dim = 0;
  std::size_t text_dim = 0;
};

// ---------------------------------------------------------------------------
// Manifest I/O
// ---------------------------------------------------------------------------

inline ManifestRow parse_manifest_line(const std::string& line) try {
  const auto j = nlohmann::json::parse(line);
  ManifestRow row;
  row.conversation_id = j.at("conversation_id").get<std::string>();
  const auto& idx = j.at("index");
  if (!idx.is_number_integer() || idx.get<std::int64_t>() < 0) {
    throw FormatError("index must be a non-negative integer");
  }
  row.index = idx.get<std::uint64_t>();
  row.language = j.at("language").get<std::string>();
  row.hypothesis = j.at("hypothesis").get<std::string>();
  if (auto it = j.find("reference"); it != j.end() && !it->is_null()) row.reference = it->get<std::string>();
  row.embedding_path = j.at("embedding_path").get<std::string>();
  return row;
} catch (const nlohmann::json::exception& e) {
  throw FormatError(e.what());
}

inline std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open manifest " + path.string());
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(parse_manifest_line(line));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

inline nlohmann::ordered_json manifest_row_json(const ManifestRow& row) {
  nlohmann::ordered_json j;
  j["conversation_id"] = row.conversation_id;
  j["index"] = row.index;
  j["language"] = row.language;
  j["hypothesis"] = row.hypothesis;
  if (row.reference) j["reference"] = *row.reference;
  j["embedding_path"] = row.embedding_path;
  return j;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IngestionError("cannot write manifest " + path.string());
  for (const auto& row : rows) out << manifest_row_json(row).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Database
// ---------------------------------------------------------------------------

// Immutable store of ContextRecords. Records of one conversation are
// contiguous and sorted by index; conversations keep manifest order.
class ContextDatabase {
 public:
  ContextDatabase() = default;

  static ContextDatabase from_records(std::vector<ContextRecord> records, DatabaseMetadata meta) {
    ContextDatabase db;
    db.meta_ = std::move(meta);
    std::unordered_map<std::string, std::size_t> conv_order;
    for (const auto& r : records) {
      if (conv_order.emplace(r.id.conversation_id, conv_order.size()).second) {
        db.conversation_ids_.push_back(r.id.conversation_id);
      }
    }
    std::stable_sort(records.begin(), records.end(), [&](const ContextRecord& a, const ContextRecord& b) {
      const auto ca = conv_order.at(a.id.conversation_id);
      const auto cb = conv_order.at(b.id.conversation_id);
      return ca != cb ? ca < cb : a.id.index < b.id.index;
    });
    for (std::size_t i = 1; i < records.size(); ++i) {
      if (records[i].id == records[i - 1].id) throw ManifestError("duplicate utterance id " + records[i].id.str());
    }
    db.records_ = std::move(records);
    for (std::size_t i = 0; i < db.records_.size(); ++i) {
      const auto& conv = db.records_[i].id.conversation_id;
      auto it = db.ranges_.try_emplace(conv, i, i).first;
      it->second.second = i + 1;
      db.by_id_.emplace(db.records_[i].id, i);
    }
    return db;
  }

  const DatabaseMetadata& metadata() const noexcept { return meta_; }
  std::span<const ContextRecord> records() const noexcept { return records_; }
  const std::vector<std::string>& conversation_ids() const noexcept { return conversation_ids_; }
  std::size_t size() const noexcept { return records_.size(); }

  bool has_conversation(const std::string& conversation_id) const { return ranges_.count(conversation_id) > 0; }

  std::span<const ContextRecord> conversation(const std::string& conversation_id) const {
    auto it = ranges_.find(conversation_id);
    if (it == ranges_.end()) throw LookupError("unknown conversation '" + conversation_id + "'");
    return std::span<const ContextRecord>(records_).subspan(it->second.first,
                                                            it->second.second - it->second.first);
  }

  const ContextRecord* find(const UtteranceId& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &records_[it->second];
  }

  const ContextRecord& at(const UtteranceId& id) const {
    if (const auto* r = find(id)) return *r;
    throw LookupError("unknown utterance " + id.str());
  }

 private:
  DatabaseMetadata meta_;
  std::vector<ContextRecord> records_;
  std::vector<std::string> conversation_ids_;
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> ranges_;
  std::unordered_map<UtteranceId, std::size_t, UtteranceIdHash> by_id_;
};

// All records of the same conversation strictly before `current`, oldest first.
inline std::span<const ContextRecord> history_of(const ContextDatabase& db, const UtteranceId& current) {
  const auto conv = db.conversation(current.conversation_id);
  const auto end = std::lower_bound(conv.begin(), conv.end(), current.index,
                                    [](const ContextRecord& r, std::uint64_t idx) { return r.id.index < idx; });
  return conv.first(static_cast<std::size_t>(end - conv.begin()));
}

inline ContextRecord make_record(UtteranceId id, SpeechEmbedding speech, std::string hypothesis, std::string language,
                                 std::optional<std::string> reference, const TextEmbedder& embedder) {
  ContextRecord r;
  r.pooled = mean_pool(speech);
  r.text_vec = embed_text(embedder, hypothesis, &id);
  r.id = std::move(id);
  r.speech = std::move(speech);
  r.hypothesis = std::move(hypothesis);
  r.language = std::move(language);
  r.reference = std::move(reference);
  return r;
}

// Ingests manifest rows; embedding paths resolve against `base_dir`.
inline ContextDatabase build_database(const std::vector<ManifestRow>& rows, const std::filesystem::path& base_dir,
                                      const TextEmbedder& embedder) {
  std::vector<ContextRecord> records;
  records.reserve(rows.size());
  std::size_t dim = 0;
  for (const auto& row : rows) {
    const UtteranceId id = row.id();
    const std::filesystem::path path = base_dir / row.embedding_path;
    if (!std::filesystem::is_regular_file(path)) {
      throw IngestionError("embedding payload for " + id.str() + " not found at " + path.string());
    }
    SpeechEmbedding speech;
    try {
      speech = read_embedding(path);
    } catch (const FormatError& e) {
      throw FormatError("embedding payload for " + id.str() + ": " + e.what());
    }
    if (dim == 0) dim = speech.dim();
    if (speech.dim() != dim) {
      throw FormatError("embedding for " + id.str() + " has dim " + std::to_string(speech.dim()) +
                        ", database dim is " + std::to_string(dim));
    }
    auto rec = make_record(id, std::move(speech), row.hypothesis, row.language, row.reference, embedder);
    rec.embedding_path = path;
    records.push_back(std::move(rec));
  }
  return ContextDatabase::from_records(std::move(records), {kDatabaseFormatVersion, embedder.id(), dim, embedder.dim()});
}

inline ContextDatabase build_database(const std::filesystem::path& manifest_path, const TextEmbedder& embedder) {
  return build_database(read_manifest(manifest_path), manifest_path.parent_path(), embedder);
}

// New database sharing speech embeddings with `db` but carrying replacement
// hypotheses (text vectors recomputed). Ids absent from `hypotheses` keep
// their stored text.
inline ContextDatabase rebuild_with_hypotheses(
    const ContextDatabase& db, const std::unordered_map<UtteranceId, std::string, UtteranceIdHash>& hypotheses,
    const TextEmbedder& embedder) {
  std::vector<ContextRecord> records;
  records.reserve(db.size());
  for (const auto& r : db.records()) {
    auto it = hypotheses.find(r.id);
    std::string hyp = it == hypotheses.end() ? r.hypothesis : it->second;
    auto rec = make_record(r.id, r.speech, std::move(hyp), r.language, r.reference, embedder);
    rec.embedding_path = r.embedding_path;
    records.push_back(std::move(rec));
  }
  auto meta = db.metadata();
  meta.embedder_id = embedder.id();
  meta.text_dim = embedder.dim();
  return ContextDatabase::from_records(std::move(records), meta);
}

// ---------------------------------------------------------------------------
// Persistence: <dir>/manifest.jsonl, <dir>/metadata.json, <dir>/embeddings/
// ---------------------------------------------------------------------------

inline std::string embedding_file_name(const UtteranceId& id) {
  std::string safe;
  for (char c : id.conversation_id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    safe.push_back(ok ? c : '_');
  }
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(id.conversation_id)));
  return "embeddings/" + safe + "-" + std::string(hash, 8) + "/" + std::to_string(id.index) + ".emb";
}

inline void save_database(const ContextDatabase& db, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestRow> rows;
  rows.reserve(db.size());
  for (const auto& r : db.records()) {
    ManifestRow row{r.id.conversation_id, r.id.index, r.language, r.hypothesis, r.reference,
                    embedding_file_name(r.id)};
    write_embedding(dir / row.embedding_path, r.speech);
    rows.push_back(std::move(row));
  }
  write_manifest(dir / "manifest.jsonl", rows);
  const auto& m = db.metadata();
  nlohmann::ordered_json meta;
  meta["format_version"] = m.format_version;
  meta["speech_dim"] = m.speech_dim;
  meta["text_dim"] = m.text_dim;
  meta["embedder_id"] = m.embedder_id;
  meta["num_records"] = db.size();
  std::ofstream out(dir / "metadata.json", std::ios::trunc);
  if (!out) throw IngestionError("cannot write " + (dir / "metadata.json").string());
  out << meta.dump(2) << '\n';
}

inline DatabaseMetadata read_metadata(const std::filesystem::path& dir) {
  std::ifstream in(dir / "metadata.json");
  if (!in) throw IngestionError("no metadata.json in " + dir.string());
  try {
    const auto j = nlohmann::json::parse(in);
    DatabaseMetadata m;
    m.format_version = j.at("format_version").get<int>();
    m.speech_dim = j.at("speech_dim").get<std::size_t>();
    m.text_dim = j.at("text_dim").get<std::size_t>();
    m.embedder_id = j.at("embedder_id").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "metadata.json").string() + ": " + e.what());
  }
}

inline ContextDatabase load_database(const std::filesystem::path& dir, const TextEmbedder& embedder) {
  const DatabaseMetadata meta = read_metadata(dir);
  if (meta.format_version != kDatabaseFormatVersion) {
    throw FormatError("unsupported database format version " + std::to_string(meta.format_version));
  }
  if (meta.embedder_id != embedder.id()) {
    throw ConfigError("database was built with embedder '" + meta.embedder_id + "' but '" + embedder.id() +
                      "' was selected");
  }
  auto db = build_database(dir / "manifest.jsonl", embedder);
  if (db.size() > 0 && db.metadata().speech_dim != meta.speech_dim) {
    throw FormatError("database speech dim disagrees with metadata");
  }
  return db;
}

}  // namespace mars
