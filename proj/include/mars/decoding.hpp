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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mars/core.hpp"
#include "mars/error.hpp"
#include "mars/parallel.hpp"
#include "mars/retrieval.hpp"
#include "mars/rng.hpp"
#include "mars/selection.hpp"
#include "mars/text_embedder.hpp"

namespace mars {

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

// "Please transcribe the speech into text" per supported language.
inline const std::unordered_map<std::string, std::string>& language_prompts() {
  static const std::unordered_map<std::string, std::string> prompts = {
      {"en", "Please transcribe the speech into text."},
      {"fr", "Veuillez transcrire la parole en texte."},
      {"de", "Bitte transkribieren Sie die Sprache in Text."},
      {"it", "Per favore, trascrivi il parlato in testo."},
      {"pt", "Por favor, transcreva a fala em texto."},
      {"es", "Por favor, transcribe el habla a texto."},
      {"ja", "音声をテキストに書き起こしてください。"},
      {"ko", "음성을 텍스트로 전사해 주세요."},
      {"ru", "Пожалуйста, преобразуйте речь в текст."},
      {"th", "กรุณาถอดเสียงพูดเป็นข้อความ"},
      {"vi", "Vui lòng chuyển lời nói thành văn bản."},
  };
  return prompts;
}

inline std::string language_code(std::string_view tag) {
  static const std::unordered_map<std::string, std::string> names = {
      {"english", "en"}, {"french", "fr"},   {"german", "de"}, {"italian", "it"},
      {"portuguese", "pt"}, {"spanish", "es"}, {"japanese", "ja"}, {"korean", "ko"},
      {"russian", "ru"}, {"thai", "th"},     {"vietnamese", "vi"},
  };
  std::string key;
  for (char c : tag) {
    if (c == '-' || c == '_') break;
    key.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c));
  }
  if (auto it = names.find(key); it != names.end()) return it->second;
  return key;
}

inline const std::string& language_prompt(std::string_view tag) {
  const auto& prompts = language_prompts();
  auto it = prompts.find(language_code(tag));
  if (it == prompts.end()) throw ConfigError("no prompt template registered for language '" + std::string(tag) + "'");
  return it->second;
}

// The LLM inputs for one utterance; the backend resolves the speech
// embedding from utterance_ref itself.
struct PromptBundle {
  std::string language_prompt;
  std::optional<std::string> context_hypothesis;
  std::string current_hypothesis;
  UtteranceId utterance_ref;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

// Multiple contexts are joined with single spaces in the order given.
inline PromptBundle assemble_prompt(const ContextRecord& current, std::span<const ContextRecord* const> contexts) {
  PromptBundle b;
  b.language_prompt = language_prompt(current.language);
  b.current_hypothesis = current.hypothesis;
  b.utterance_ref = current.id;
  if (!contexts.empty()) {
    std::string joined;
    for (const auto* c : contexts) {
      if (!joined.empty()) joined.push_back(' ');
      joined += c->hypothesis;
    }
    b.context_hypothesis = std::move(joined);
  }
  return b;
}

inline PromptBundle assemble_prompt(const ContextRecord& current, const ContextRecord* best) {
  if (!best) return assemble_prompt(current, std::span<const ContextRecord* const>{});
  return assemble_prompt(current, std::span<const ContextRecord* const>(&best, 1));
}

// ---------------------------------------------------------------------------
// Backend contract
// ---------------------------------------------------------------------------

// ASR backend. transcribe() is called concurrently from decode workers and
// signals failure with BackendError.
class AsrBackend {
 public:
  virtual ~AsrBackend() = default;
  virtual std::string id() const = 0;
  virtual std::string transcribe(const PromptBundle& bundle) const = 0;
};

// ---------------------------------------------------------------------------
// Context choice per decoding mode
// ---------------------------------------------------------------------------

enum class DecodeMode { direct, mars, two_pass, preceding_n, sum_top1, speech_only, text_only };

inline const char* to_string(DecodeMode m) {
  switch (m) {
    case DecodeMode::direct: return "direct";
    case DecodeMode::mars: return "mars";
    case DecodeMode::two_pass: return "two-pass";
    case DecodeMode::preceding_n: return "preceding-n";
    case DecodeMode::sum_top1: return "sum-top1";
    case DecodeMode::speech_only: return "speech-only";
    case DecodeMode::text_only: return "text-only";
  }
  return "?";
}

inline DecodeMode parse_decode_mode(std::string_view s) {
  for (auto m : {DecodeMode::direct, DecodeMode::mars, DecodeMode::two_pass, DecodeMode::preceding_n,
                 DecodeMode::sum_top1, DecodeMode::speech_only, DecodeMode::text_only}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown decode mode '" + std::string(s) + "'");
}

struct DecodeParams {
  RetrievalParams retrieval;
  std::size_t preceding_n = 1;  // context count for preceding-n
  std::size_t workers = 1;
};

struct ContextChoice {
  std::vector<const ContextRecord*> contexts;
  std::optional<double> closeness;  // near-ideal score of the chosen row (mars only)
};

// Context for `current` under a single-pass mode. speech-only and text-only
// use that modality's Top-K (best first); two-pass is resolved by the caller.
inline ContextChoice choose_context(const ContextDatabase& db, const ContextRecord& current, DecodeMode mode,
                                    const DecodeParams& p) {
  ContextChoice choice;
  switch (mode) {
    case DecodeMode::direct:
      break;
    case DecodeMode::mars:
    case DecodeMode::sum_top1: {
      const auto r = retrieve_multimodal(db, current, p.retrieval);
      if (r.completed.empty()) break;
      if (mode == DecodeMode::mars) {
        const auto ranking = rank_candidates(r.completed);
        const auto best = ranking.ranking.best_index;
        choice.contexts.push_back(r.completed[best].record);
        choice.closeness = ranking.ranking.closeness[best];
      } else {
        choice.contexts.push_back(select_sum_top1(r.completed).record);
      }
      break;
    }
    case DecodeMode::preceding_n:
      for (const auto& rec : select_preceding_n(db, current.id, p.preceding_n)) choice.contexts.push_back(&rec);
      break;
    case DecodeMode::speech_only:
      for (const auto& c : retrieve_speech_topk(db, current, p.retrieval.k, p.retrieval.weights, p.retrieval.radius)) {
        choice.contexts.push_back(c.record);
      }
      break;
    case DecodeMode::text_only:
      for (const auto& c : retrieve_text_topk(db, current, p.retrieval.k)) choice.contexts.push_back(c.record);
      break;
    case DecodeMode::two_pass:
      throw ConfigError("two-pass decoding has no single-pass context rule");
  }
  return choice;
}

// ---------------------------------------------------------------------------
// Decoding passes
// ---------------------------------------------------------------------------

struct DecodeRecord {
  UtteranceId id;
  PromptBundle bundle;
  std::vector<UtteranceId> context_ids;
  std::optional<double> closeness;
  std::string transcription;
  std::optional<std::string> error;  // backend failure; transcription is empty
};

inline bool has_failures(std::span<const DecodeRecord> records) {
  for (const auto& r : records) {
    if (r.error) return true;
  }
  return false;
}

inline DecodeRecord decode_one(const ContextDatabase& db, const ContextRecord& current, DecodeMode mode,
                               const AsrBackend& backend, const DecodeParams& p) {
  const ContextChoice choice = choose_context(db, current, mode, p);
  DecodeRecord rec;
  rec.id = current.id;
  rec.bundle = assemble_prompt(current, choice.contexts);
  for (const auto* c : choice.contexts) rec.context_ids.push_back(c->id);
  rec.closeness = choice.closeness;
  try {
    rec.transcription = backend.transcribe(rec.bundle);
  } catch (const BackendError& e) {
    rec.error = e.what();
  }
  return rec;
}

// Decodes the given records (in order) under a single-pass mode. Utterances
// are independent; workers only change scheduling, never results.
inline std::vector<DecodeRecord> decode_records(const ContextDatabase& db, std::span<const ContextRecord> utterances,
                                                DecodeMode mode, const AsrBackend& backend, const DecodeParams& p) {
  std::vector<DecodeRecord> out(utterances.size());
  parallel_for(utterances.size(), p.workers,
               [&](std::size_t i) { out[i] = decode_one(db, utterances[i], mode, backend, p); });
  return out;
}

inline std::vector<DecodeRecord> decode_direct(const ContextDatabase& db, const std::string& conversation_id,
                                               const AsrBackend& backend, const DecodeParams& p = {}) {
  return decode_records(db, db.conversation(conversation_id), DecodeMode::direct, backend, p);
}

inline std::vector<DecodeRecord> decode_mars(const ContextDatabase& db, const std::string& conversation_id,
                                             const AsrBackend& backend, const DecodeParams& p = {}) {
  return decode_records(db, db.conversation(conversation_id), DecodeMode::mars, backend, p);
}

// Pass 1 decodes directly; a new database carrying the pass-1 transcriptions
// as hypotheses (speech unchanged, text vectors recomputed) is built; pass 2
// runs MARS decoding against it. Any pass-1 failure aborts before pass 2.
inline std::vector<DecodeRecord> decode_two_pass(const ContextDatabase& db, std::span<const ContextRecord> utterances,
                                                 const AsrBackend& backend, const TextEmbedder& embedder,
                                                 const DecodeParams& p, ContextDatabase* second_db_out = nullptr) {
  const auto pass1 = decode_records(db, utterances, DecodeMode::direct, backend, p);
  std::unordered_map<UtteranceId, std::string, UtteranceIdHash> hyps;
  for (const auto& r : pass1) {
    if (r.error) throw BackendError("first pass failed for " + r.id.str() + ": " + *r.error);
    hyps.emplace(r.id, r.transcription);
  }
  ContextDatabase second = rebuild_with_hypotheses(db, hyps, embedder);
  std::vector<DecodeRecord> out(utterances.size());
  parallel_for(utterances.size(), p.workers, [&](std::size_t i) {
    out[i] = decode_one(second, second.at(utterances[i].id), DecodeMode::mars, backend, p);
  });
  if (second_db_out) *second_db_out = std::move(second);
  return out;
}

// Whole-database decode in database order (conversations in manifest order,
// utterances by index).
inline std::vector<DecodeRecord> decode_corpus(const ContextDatabase& db, DecodeMode mode, const AsrBackend& backend,
                                               const TextEmbedder& embedder, const DecodeParams& p) {
  if (mode == DecodeMode::two_pass) return decode_two_pass(db, db.records(), backend, embedder, p);
  return decode_records(db, db.records(), mode, backend, p);
}

// ---------------------------------------------------------------------------
// Training examples and context masking
// ---------------------------------------------------------------------------

struct TrainingExample {
  PromptBundle bundle;
  std::string target;
  bool masked = false;

  friend bool operator==(const TrainingExample&, const TrainingExample&) = default;
};

// Each example is masked independently with probability p, drawing from one
// seeded stream in input order.
inline std::vector<TrainingExample> mask_contexts(std::vector<TrainingExample> examples, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("mask probability must lie in [0, 1]");
  Rng rng(derive_seed(seed, "masking"));
  for (auto& ex : examples) {
    if (rng.uniform() < p) {
      ex.bundle.context_hypothesis.reset();
      ex.masked = true;
    }
  }
  return examples;
}

// Training inputs with the MARS-selected context and the reference as target.
inline std::vector<TrainingExample> build_training_examples(const ContextDatabase& db, const DecodeParams& p) {
  std::vector<TrainingExample> out(db.size());
  const auto recs = db.records();
  parallel_for(recs.size(), p.workers, [&](std::size_t i) {
    const auto& current = recs[i];
    if (!current.reference) throw FormatError("utterance " + current.id.str() + " has no reference transcription");
    const auto choice = choose_context(db, current, DecodeMode::mars, p);
    out[i].bundle = assemble_prompt(current, choice.contexts);
    out[i].target = *current.reference;
  });
  return out;
}

}  // namespace mars
