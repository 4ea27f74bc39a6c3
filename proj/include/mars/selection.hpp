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
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mars/core.hpp"
#include "mars/error.hpp"
#include "mars/retrieval.hpp"

namespace mars {

// Near-ideal ranking over (speech, text) retrieval similarities.
//
// Each column is scaled by its L2 norm, the ideal and negative-ideal points
// take the column-wise max and min, and every row is scored by its relative
// closeness d- / (d+ + d-) where d+ and d- are Euclidean distances to the two
// points. The row with the largest closeness wins.

struct DecisionRow {
  double sw = 0.0;
  double tw = 0.0;
  std::uint64_t recency = 0;  // utterance index, used only to break ties
};

struct DecisionMatrix {
  std::vector<DecisionRow> rows;
  std::vector<double> sr;  // normalised sw column, empty until normalize_matrix
  std::vector<double> tr;

  bool normalized() const { return !rows.empty() && sr.size() == rows.size() && tr.size() == rows.size(); }

  static DecisionMatrix from_candidates(std::span<const RetrievalCandidate> cands) {
    DecisionMatrix m;
    m.rows.reserve(cands.size());
    for (const auto& c : cands) {
      if (!c.sw || !c.tw) throw SelectionError("candidate " + c.id().str() + " lacks a similarity");
      m.rows.push_back({*c.sw, *c.tw, c.id().index});
    }
    return m;
  }
};

struct IdealPoints {
  double sa_plus = 0.0;
  double ta_plus = 0.0;
  double sa_minus = 0.0;
  double ta_minus = 0.0;
};

struct ClosenessRanking {
  std::vector<double> d_plus;
  std::vector<double> d_minus;
  std::vector<double> closeness;
  std::size_t best_index = 0;
};

// A column whose raw norm is zero maps to an all-zero column. Signs are kept.
inline DecisionMatrix normalize_matrix(DecisionMatrix m) {
  if (m.rows.empty()) throw SelectionError("decision matrix has no rows");
  double ss = 0.0;
  double ts = 0.0;
  for (const auto& r : m.rows) {
    if (!std::isfinite(r.sw) || !std::isfinite(r.tw)) throw SelectionError("decision matrix has a non-finite entry");
    ss += r.sw * r.sw;
    ts += r.tw * r.tw;
  }
  const double sn = std::sqrt(ss);
  const double tn = std::sqrt(ts);
  m.sr.assign(m.rows.size(), 0.0);
  m.tr.assign(m.rows.size(), 0.0);
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    if (sn > 0.0) m.sr[i] = m.rows[i].sw / sn;
    if (tn > 0.0) m.tr[i] = m.rows[i].tw / tn;
  }
  return m;
}

inline IdealPoints ideal_points(const DecisionMatrix& m) {
  if (!m.normalized()) throw SelectionError("ideal points need a normalised matrix");
  const auto [s_lo, s_hi] = std::minmax_element(m.sr.begin(), m.sr.end());
  const auto [t_lo, t_hi] = std::minmax_element(m.tr.begin(), m.tr.end());
  return {*s_hi, *t_hi, *s_lo, *t_lo};
}

// Rows at zero distance from both points (every row identical) score 0.5.
inline ClosenessRanking closeness(const DecisionMatrix& m, const IdealPoints& ip) {
  if (!m.normalized()) throw SelectionError("closeness needs a normalised matrix");
  const std::size_t n = m.rows.size();
  ClosenessRanking out;
  out.d_plus.resize(n);
  out.d_minus.resize(n);
  out.closeness.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dsp = m.sr[i] - ip.sa_plus;
    const double dtp = m.tr[i] - ip.ta_plus;
    const double dsm = m.sr[i] - ip.sa_minus;
    const double dtm = m.tr[i] - ip.ta_minus;
    out.d_plus[i] = std::sqrt(dsp * dsp + dtp * dtp);
    out.d_minus[i] = std::sqrt(dsm * dsm + dtm * dtm);
    const double denom = out.d_plus[i] + out.d_minus[i];
    out.closeness[i] = denom > 0.0 ? out.d_minus[i] / denom : 0.5;
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double ci = out.closeness[i];
    const double cb = out.closeness[out.best_index];
    if (ci > cb || (ci == cb && m.rows[i].recency > m.rows[out.best_index].recency)) out.best_index = i;
  }
  return out;
}

struct NearIdealRanking {
  DecisionMatrix matrix;
  IdealPoints ideal;
  ClosenessRanking ranking;
};

inline NearIdealRanking rank_matrix(DecisionMatrix raw) {
  NearIdealRanking r;
  r.matrix = normalize_matrix(std::move(raw));
  r.ideal = ideal_points(r.matrix);
  r.ranking = closeness(r.matrix, r.ideal);
  return r;
}

inline NearIdealRanking rank_candidates(std::span<const RetrievalCandidate> cands) {
  return rank_matrix(DecisionMatrix::from_candidates(cands));
}

inline RetrievalCandidate select_best(std::span<const RetrievalCandidate> cands) {
  if (cands.empty()) throw SelectionError("no candidates to select from");
  return cands[rank_candidates(cands).ranking.best_index];
}

// Baseline: the candidate with the largest sw + tw, recency breaking ties.
inline RetrievalCandidate select_sum_top1(std::span<const RetrievalCandidate> cands) {
  if (cands.empty()) throw SelectionError("no candidates to select from");
  std::size_t best = 0;
  auto total = [&](std::size_t i) {
    if (!cands[i].sw || !cands[i].tw) throw SelectionError("candidate " + cands[i].id().str() + " lacks a similarity");
    return *cands[i].sw + *cands[i].tw;
  };
  double best_total = total(0);
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const double t = total(i);
    if (t > best_total || (t == best_total && cands[i].id().index > cands[best].id().index)) {
      best = i;
      best_total = t;
    }
  }
  return cands[best];
}

// Baseline: the n utterances immediately preceding `current`, oldest first.
inline std::span<const ContextRecord> select_preceding_n(const ContextDatabase& db, const UtteranceId& current,
                                                         std::size_t n) {
  if (n == 0) throw ConfigError("preceding-n needs n >= 1");
  const auto history = history_of(db, current);
  return history.last(std::min(n, history.size()));
}

}  // namespace mars
