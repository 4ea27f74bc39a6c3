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
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mars/core.hpp"
#include "mars/error.hpp"
#include "mars/similarity.hpp"

namespace mars {

enum class RetrievalSource { speech, text };

inline const char* to_string(RetrievalSource s) { return s == RetrievalSource::speech ? "speech" : "text"; }

struct RetrievalCandidate {
  const ContextRecord* record = nullptr;
  std::optional<double> sw;  // speech retrieval similarity
  std::optional<double> tw;  // text retrieval similarity
  RetrievalSource source = RetrievalSource::speech;
  bool retrieved_by_both = false;

  const UtteranceId& id() const { return record->id; }
};

struct RetrievalParams {
  std::size_t k = 3;
  SpeechSimilarityWeights weights;
  std::size_t radius = 1;
};

// sw between the current utterance and a stored one. Pooled vectors come from
// the record caches, which equal mean_pool of the stored frames.
inline double speech_retrieval_similarity(const ContextRecord& current, const ContextRecord& other,
                                          const SpeechSimilarityWeights& w, std::size_t radius) {
  const double frame_sim = frame_level_similarity(current.speech, other.speech, radius);
  return fuse_speech_similarity(w, frame_sim, cosine(current.pooled, other.pooled));
}

inline double text_retrieval_similarity(const ContextRecord& current, const ContextRecord& other) {
  return cosine(current.text_vec, other.text_vec);
}

namespace detail {

// Highest score first; equal scores prefer the more recent utterance.
template <typename Score>
std::vector<RetrievalCandidate> top_k_by(std::span<const ContextRecord> history, std::size_t k,
                                         RetrievalSource source, Score&& score) {
  if (k == 0) throw ConfigError("K must be at least 1");
  struct Scored {
    double value;
    const ContextRecord* record;
  };
  std::vector<Scored> scored;
  scored.reserve(history.size());
  for (const auto& r : history) scored.push_back({score(r), &r});
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    [](const Scored& a, const Scored& b) {
                      if (a.value != b.value) return a.value > b.value;
                      return a.record->id.index > b.record->id.index;
                    });
  std::vector<RetrievalCandidate> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    RetrievalCandidate c;
    c.record = scored[i].record;
    c.source = source;
    if (source == RetrievalSource::speech) {
      c.sw = scored[i].value;
    } else {
      c.tw = scored[i].value;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

inline std::vector<RetrievalCandidate> retrieve_speech_topk(const ContextDatabase& db, const ContextRecord& current,
                                                            std::size_t k, const SpeechSimilarityWeights& w,
                                                            std::size_t radius) {
  return detail::top_k_by(history_of(db, current.id), k, RetrievalSource::speech,
                          [&](const ContextRecord& r) { return speech_retrieval_similarity(current, r, w, radius); });
}

inline std::vector<RetrievalCandidate> retrieve_text_topk(const ContextDatabase& db, const ContextRecord& current,
                                                          std::size_t k) {
  return detail::top_k_by(history_of(db, current.id), k, RetrievalSource::text,
                          [&](const ContextRecord& r) { return text_retrieval_similarity(current, r); });
}

// Fills the missing similarity of every candidate and merges candidates that
// arrived from both modalities. Present values are kept as-is. Output order is
// first arrival order.
inline std::vector<RetrievalCandidate> complete_similarities(std::span<const RetrievalCandidate> cands,
                                                             const ContextRecord& current,
                                                             const SpeechSimilarityWeights& w, std::size_t radius) {
  std::vector<RetrievalCandidate> out;
  out.reserve(cands.size());
  for (const auto& c : cands) {
    if (!c.sw && !c.tw) throw SelectionError("candidate " + c.id().str() + " carries no similarity");
    auto dup = std::find_if(out.begin(), out.end(), [&](const RetrievalCandidate& o) { return o.record == c.record; });
    if (dup != out.end()) {
      if (!dup->sw && c.sw) dup->sw = c.sw;
      if (!dup->tw && c.tw) dup->tw = c.tw;
      if (dup->source != c.source) dup->retrieved_by_both = true;
      continue;
    }
    out.push_back(c);
  }
  for (auto& c : out) {
    if (!c.sw) c.sw = speech_retrieval_similarity(current, *c.record, w, radius);
    if (!c.tw) c.tw = text_retrieval_similarity(current, *c.record);
  }
  return out;
}

struct MultiModalRetrieval {
  std::vector<RetrievalCandidate> speech;
  std::vector<RetrievalCandidate> text;
  std::vector<RetrievalCandidate> completed;  // deduplicated, both similarities set
};

inline MultiModalRetrieval retrieve_multimodal(const ContextDatabase& db, const ContextRecord& current,
                                               const RetrievalParams& p) {
  MultiModalRetrieval r;
  r.speech = retrieve_speech_topk(db, current, p.k, p.weights, p.radius);
  r.text = retrieve_text_topk(db, current, p.k);
  std::vector<RetrievalCandidate> all = r.speech;
  all.insert(all.end(), r.text.begin(), r.text.end());
  r.completed = complete_similarities(all, current, p.weights, p.radius);
  return r;
}

}  // namespace mars
