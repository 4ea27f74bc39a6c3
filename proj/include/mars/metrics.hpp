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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mars/error.hpp"
#include "mars/text.hpp"

namespace mars {

enum class ErrorMetric { wer, cer };
enum class MerMode { macro, micro };

inline const char* to_string(ErrorMetric m) { return m == ErrorMetric::wer ? "wer" : "cer"; }
inline const char* to_string(MerMode m) { return m == MerMode::macro ? "macro" : "micro"; }

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_length = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }

  EditCounts& operator+=(const EditCounts& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    ref_length += o.ref_length;
    return *this;
  }
};

// Unit-cost Levenshtein alignment with S/D/I breakdown. The breakdown follows
// a backtrace that prefers match/substitution, then deletion, then insertion;
// the total is the edit distance regardless.
template <typename T>
EditCounts align(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
  for (std::size_t i = 0; i <= n; ++i) d[at(i, 0)] = i;
  for (std::size_t j = 0; j <= m; ++j) d[at(0, j)] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = d[at(i - 1, j - 1)] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[at(i, j)] = std::min({sub, d[at(i - 1, j)] + 1, d[at(i, j - 1)] + 1});
    }
  }
  EditCounts c;
  c.ref_length = n;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[at(i, j)] == d[at(i - 1, j - 1)] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++c.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[at(i, j)] == d[at(i - 1, j)] + 1) {
      ++c.deletions;
      --i;
    } else {
      ++c.insertions;
      --j;
    }
  }
  return c;
}

inline EditCounts word_edits(std::string_view ref, std::string_view hyp) {
  const auto r = text::words(ref);
  const auto h = text::words(hyp);
  return align<std::string>(r, h);
}

inline EditCounts char_edits(std::string_view ref, std::string_view hyp) {
  const auto r = text::characters(ref);
  const auto h = text::characters(hyp);
  return align<char32_t>(std::span<const char32_t>(r.data(), r.size()), std::span<const char32_t>(h.data(), h.size()));
}

inline double rate(const EditCounts& c) {
  if (c.ref_length == 0) throw ScoringError("error rate undefined: references contain no tokens");
  return static_cast<double>(c.errors()) / static_cast<double>(c.ref_length);
}

namespace detail {

template <typename Edits>
EditCounts corpus_edits(std::span<const std::string> refs, std::span<const std::string> hyps, Edits&& edits) {
  if (refs.size() != hyps.size()) {
    throw ScoringError("reference/hypothesis count mismatch: " + std::to_string(refs.size()) + " vs " +
                       std::to_string(hyps.size()));
  }
  EditCounts total;
  for (std::size_t i = 0; i < refs.size(); ++i) total += edits(refs[i], hyps[i]);
  return total;
}

}  // namespace detail

// Corpus-level (S + D + I) / N over whitespace tokens of normalised text.
inline double word_error_rate(std::span<const std::string> refs, std::span<const std::string> hyps) {
  return rate(detail::corpus_edits(refs, hyps, word_edits));
}

// As word_error_rate over characters, whitespace dropped.
inline double char_error_rate(std::span<const std::string> refs, std::span<const std::string> hyps) {
  return rate(detail::corpus_edits(refs, hyps, char_edits));
}

// Primary language subtag, lowercased: "ja-JP" -> "ja", "English-American" -> "english".
inline std::string language_key(std::string_view tag) {
  std::string key;
  for (char c : tag) {
    if (c == '-' || c == '_') break;
    key.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c));
  }
  return key;
}

// Character-based writing systems without word boundaries are scored by CER.
inline ErrorMetric metric_for_language(std::string_view tag) {
  const std::string key = language_key(tag);
  static const char* const kCharacterScored[] = {"ja", "ko", "th", "japanese", "korean", "thai"};
  for (const char* k : kCharacterScored) {
    if (key == k) return ErrorMetric::cer;
  }
  return ErrorMetric::wer;
}

struct ScoredUtterance {
  std::string language;
  std::string reference;
  std::string hypothesis;
};

struct LanguageScore {
  std::string language;
  ErrorMetric metric = ErrorMetric::wer;
  double error_rate = 0.0;
  EditCounts edits;
  std::size_t n_utterances = 0;
};

struct ScoreReport {
  std::vector<LanguageScore> languages;  // sorted by language tag
  double mer = 0.0;
  MerMode mode = MerMode::macro;
};

// Scores each language with its metric, then averages: macro = unweighted
// mean of per-language rates, micro = pooled errors over pooled tokens.
inline ScoreReport mixed_error_rate(std::span<const ScoredUtterance> utts, MerMode mode = MerMode::macro) {
  if (utts.empty()) throw ScoringError("no utterances to score");
  std::map<std::string, LanguageScore> by_lang;
  for (const auto& u : utts) {
    auto& ls = by_lang[u.language];
    ls.language = u.language;
    ls.metric = metric_for_language(u.language);
    ls.edits += ls.metric == ErrorMetric::wer ? word_edits(u.reference, u.hypothesis)
                                              : char_edits(u.reference, u.hypothesis);
    ++ls.n_utterances;
  }
  ScoreReport report;
  report.mode = mode;
  EditCounts pooled;
  double sum = 0.0;
  for (auto& [lang, ls] : by_lang) {
    if (ls.edits.ref_length == 0) throw ScoringError("language '" + lang + "' has no reference tokens");
    ls.error_rate = rate(ls.edits);
    sum += ls.error_rate;
    pooled += ls.edits;
    report.languages.push_back(ls);
  }
  report.mer = mode == MerMode::macro ? sum / static_cast<double>(report.languages.size()) : rate(pooled);
  return report;
}

}  // namespace mars
