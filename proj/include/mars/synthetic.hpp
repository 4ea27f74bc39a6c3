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
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "mars/core.hpp"
#include "mars/embedding_io.hpp"
#include "mars/error.hpp"
#include "mars/rng.hpp"
#include "mars/text.hpp"
#include "mars/text_embedder.hpp"

namespace mars {

// Parameters of a synthetic conversational corpus.
//
// Every utterance after the first in a conversation designates one earlier
// utterance (gap drawn uniformly from [gap_min, gap_max], capped by the
// position) and repeats `shared_tokens` of that utterance's own topic tokens
// as one contiguous phrase. Speech frames are per-token prototypes plus
// frame noise plus a per-conversation random-walk drift, so shared phrases
// produce similar frame motifs and correlated pooled means.
struct CorpusSpec {
  std::size_t n_conversations = 50;
  std::size_t utterances_per_conversation = 40;
  std::vector<std::string> languages = {"en", "de", "ja"};  // assigned round-robin per conversation
  std::size_t own_tokens = 6;     // fresh topic tokens introduced by each utterance
  std::size_t shared_tokens = 4;  // tokens repeated from the designated context
  std::size_t filler_tokens = 1;  // tokens drawn from a small pool shared by everyone
  std::size_t filler_pool = 8;
  std::size_t gap_min = 1;
  std::size_t gap_max = 9;
  std::size_t embedding_dim = 64;
  std::size_t frames_per_token = 4;
  double frame_noise = 0.3;
  double drift_step = 0.005;
  double hypothesis_error_rate = 0.3;  // first-pass hypothesis corruption
  std::uint64_t seed = 20250917;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("invalid corpus spec: " + m); };
    if (n_conversations == 0 || utterances_per_conversation == 0) fail("empty corpus");
    if (languages.empty()) fail("no languages");
    if (own_tokens == 0) fail("own_tokens must be positive");
    if (shared_tokens > own_tokens) fail("shared_tokens exceeds own_tokens");
    if (filler_tokens > 0 && filler_pool == 0) fail("filler_pool must be positive");
    if (gap_min == 0 || gap_max < gap_min) fail("gap range must satisfy 1 <= gap_min <= gap_max");
    if (embedding_dim == 0 || frames_per_token == 0) fail("embedding dimensions must be positive");
    if (frame_noise < 0.0 || drift_step < 0.0) fail("noise levels must be non-negative");
    if (!(hypothesis_error_rate >= 0.0 && hypothesis_error_rate <= 1.0)) fail("hypothesis_error_rate outside [0, 1]");
  }
};

struct SyntheticUtterance {
  ManifestRow row;  // reference and hypothesis set; embedding_path relative
  SpeechEmbedding speech;
  std::optional<std::uint64_t> designated;  // index of the designated context
  std::vector<std::string> own;             // this utterance's topic tokens
};

struct SyntheticCorpus {
  CorpusSpec spec;
  std::vector<SyntheticUtterance> utterances;  // conversation-major, index ascending
};

namespace detail {

inline std::string make_word(Rng& rng) {
  static constexpr std::string_view kOnsets = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  const std::size_t syllables = 2 + rng.uniform_int(0, 1);
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w.push_back(kOnsets[rng.uniform_int(0, kOnsets.size() - 1)]);
    w.push_back(kVowels[rng.uniform_int(0, kVowels.size() - 1)]);
  }
  return w;
}

inline std::vector<float> token_prototype(const std::string& token, std::size_t dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed ^ fnv1a64(token), "prototype"));
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

}  // namespace detail

inline SyntheticCorpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "corpus"));
  Rng noise(derive_seed(spec.seed, "corpus-noise"));

  std::unordered_set<std::string> used;
  auto fresh_word = [&] {
    for (;;) {
      std::string w = detail::make_word(rng);
      if (used.insert(w).second) return w;
    }
  };
  std::vector<std::string> fillers;
  for (std::size_t i = 0; i < spec.filler_pool; ++i) fillers.push_back(fresh_word());

  SyntheticCorpus corpus;
  corpus.spec = spec;
  for (std::size_t c = 0; c < spec.n_conversations; ++c) {
    const std::string conv = "conv" + std::to_string(c);
    const std::string& language = spec.languages[c % spec.languages.size()];
    const std::size_t first = corpus.utterances.size();
    std::vector<float> drift(spec.embedding_dim, 0.0f);

    for (std::size_t i = 0; i < spec.utterances_per_conversation; ++i) {
      SyntheticUtterance u;
      for (std::size_t k = 0; k < spec.own_tokens; ++k) u.own.push_back(fresh_word());

      std::vector<std::string> tokens = u.own;
      std::vector<std::string> phrase;
      if (i > 0) {
        const std::size_t gap = rng.uniform_int(std::min(spec.gap_min, i), std::min(spec.gap_max, i));
        u.designated = i - gap;
        const auto& source = corpus.utterances[first + *u.designated].own;
        const std::size_t start = rng.uniform_int(0, source.size() - spec.shared_tokens);
        phrase.assign(source.begin() + static_cast<std::ptrdiff_t>(start),
                      source.begin() + static_cast<std::ptrdiff_t>(start + spec.shared_tokens));
      } else {
        for (std::size_t k = 0; k < spec.shared_tokens; ++k) tokens.push_back(fresh_word());
      }
      for (std::size_t k = 0; k < spec.filler_tokens; ++k) {
        tokens.push_back(fillers[rng.uniform_int(0, fillers.size() - 1)]);
      }
      // Shuffle the loose tokens, then splice the shared phrase in whole.
      for (std::size_t k = tokens.size(); k > 1; --k) std::swap(tokens[k - 1], tokens[rng.uniform_int(0, k - 1)]);
      if (!phrase.empty()) {
        const std::size_t at = rng.uniform_int(0, tokens.size());
        tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at), phrase.begin(), phrase.end());
      }

      std::string reference;
      std::string hypothesis;
      std::vector<float> frames;
      frames.reserve(tokens.size() * spec.frames_per_token * spec.embedding_dim);
      for (const auto& t : tokens) {
        if (!reference.empty()) {
          reference.push_back(' ');
          hypothesis.push_back(' ');
        }
        reference += t;
        hypothesis += rng.bernoulli(spec.hypothesis_error_rate) ? text::garble(t) : t;
        const auto proto = detail::token_prototype(t, spec.embedding_dim, spec.seed);
        for (std::size_t f = 0; f < spec.frames_per_token; ++f) {
          for (std::size_t k = 0; k < spec.embedding_dim; ++k) {
            drift[k] += static_cast<float>(spec.drift_step * noise.normal());
            frames.push_back(proto[k] + drift[k] + static_cast<float>(spec.frame_noise * noise.normal()));
          }
        }
      }

      u.row.conversation_id = conv;
      u.row.index = i;
      u.row.language = language;
      u.row.reference = std::move(reference);
      u.row.hypothesis = std::move(hypothesis);
      u.row.embedding_path = "embeddings/" + conv + "/" + std::to_string(i) + ".emb";
      u.speech = SpeechEmbedding(spec.embedding_dim, std::move(frames));
      corpus.utterances.push_back(std::move(u));
    }
  }
  return corpus;
}

// Writes manifest.jsonl and the embedding payloads under `dir`.
inline void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::vector<ManifestRow> rows;
  rows.reserve(corpus.utterances.size());
  for (const auto& u : corpus.utterances) {
    write_embedding(dir / u.row.embedding_path, u.speech);
    rows.push_back(u.row);
  }
  write_manifest(dir / "manifest.jsonl", rows);
}

// Database built straight from memory, equivalent to write_corpus followed by
// build_database on the written manifest.
inline ContextDatabase corpus_database(const SyntheticCorpus& corpus, const TextEmbedder& embedder) {
  std::vector<ContextRecord> records;
  records.reserve(corpus.utterances.size());
  for (const auto& u : corpus.utterances) {
    auto rec = make_record(u.row.id(), u.speech, u.row.hypothesis, u.row.language, u.row.reference, embedder);
    rec.embedding_path = u.row.embedding_path;
    records.push_back(std::move(rec));
  }
  const std::size_t d = corpus.spec.embedding_dim;
  return ContextDatabase::from_records(std::move(records), {kDatabaseFormatVersion, embedder.id(), d, embedder.dim()});
}

struct CorpusStats {
  double mean_gap = 0.0;
  double token_overlap = 0.0;  // mean share of an utterance's tokens found in its designated context
  std::size_t designated_count = 0;
};

inline CorpusStats corpus_stats(const SyntheticCorpus& corpus) {
  CorpusStats s;
  double gap_sum = 0.0;
  double overlap_sum = 0.0;
  std::size_t conv_start = 0;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const auto& u = corpus.utterances[i];
    if (u.row.index == 0) conv_start = i;
    if (!u.designated) continue;
    const auto& ctx = corpus.utterances[conv_start + *u.designated];
    const auto ctx_words = text::words(*ctx.row.reference);
    const std::unordered_set<std::string> ctx_set(ctx_words.begin(), ctx_words.end());
    const auto words = text::words(*u.row.reference);
    std::size_t hit = 0;
    for (const auto& w : words) hit += ctx_set.count(w);
    gap_sum += static_cast<double>(u.row.index - *u.designated);
    overlap_sum += static_cast<double>(hit) / static_cast<double>(words.size());
    ++s.designated_count;
  }
  if (s.designated_count > 0) {
    s.mean_gap = gap_sum / static_cast<double>(s.designated_count);
    s.token_overlap = overlap_sum / static_cast<double>(s.designated_count);
  }
  return s;
}

}  // namespace mars
