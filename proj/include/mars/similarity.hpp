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
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mars/error.hpp"
#include "mars/types.hpp"

namespace mars {

struct DtwResult {
  double distance = 0.0;      // summed Euclidean frame distance along the warping path
  std::size_t path_length = 0;  // number of aligned (i, j) cells on that path
};

// Weights of the frame-level (DTW) and utterance-level (pooled cosine) terms.
struct SpeechSimilarityWeights {
  double w_frame = 0.5;
  double w_utt = 0.5;

  static SpeechSimilarityWeights from_frame_weight(double w_frame) {
    if (!(w_frame >= 0.0 && w_frame <= 1.0)) {
      throw ConfigError("w_frame must lie in [0, 1], got " + std::to_string(w_frame));
    }
    return {w_frame, 1.0 - w_frame};
  }
};

namespace detail {

// Borrowed frame-major sequence; lets coarsened levels share the kernel.
struct FrameSeq {
  const float* data = nullptr;
  std::size_t n = 0;
  std::size_t d = 0;

  const float* frame(std::size_t i) const { return data + i * d; }
};

// Four independent partial sums keep the adds pipelined.
inline double euclidean(const float* a, const float* b, std::size_t d) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t body = d - d % 4;
  for (std::size_t k = 0; k < body; k += 4) {
    for (std::size_t l = 0; l < 4; ++l) {
      const double diff = static_cast<double>(a[k + l]) - static_cast<double>(b[k + l]);
      acc[l] += diff * diff;
    }
  }
  for (std::size_t k = body; k < d; ++k) {
    const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    acc[k - body] += diff * diff;
  }
  return std::sqrt((acc[0] + acc[1]) + (acc[2] + acc[3]));
}

// Per-row inclusive column interval [lo[i], hi[i]] of admissible cells.
struct Window {
  std::vector<std::size_t> lo;
  std::vector<std::size_t> hi;

  static Window full(std::size_t n, std::size_t m) {
    return {std::vector<std::size_t>(n, 0), std::vector<std::size_t>(n, m - 1)};
  }
};

struct WarpPath {
  DtwResult result;
  std::vector<std::pair<std::size_t, std::size_t>> cells;  // (0,0) .. (n-1,m-1)
};

enum Step : std::uint8_t { kStart = 0, kDiag = 1, kUp = 2, kLeft = 3 };

// DTW restricted to `window`. Cells carry (cost, length) minimised
// lexicographically, so among equal-cost paths the shortest is reported.
// Path cost is accumulated as predecessor + local distance; every caller
// (exact or windowed) sums a given path in the same order.
inline WarpPath windowed_dtw(const FrameSeq& a, const FrameSeq& b, const Window& w, bool want_path) {
  const std::size_t n = a.n;
  std::vector<std::size_t> offset(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offset[i + 1] = offset[i] + (w.hi[i] - w.lo[i] + 1);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(offset[n], kInf);
  std::vector<std::uint32_t> len(offset[n], 0);
  std::vector<std::uint8_t> step(want_path ? offset[n] : 0, kStart);

  auto in_row = [&](std::size_t i, std::size_t j) { return j >= w.lo[i] && j <= w.hi[i]; };
  auto at = [&](std::size_t i, std::size_t j) { return offset[i] + (j - w.lo[i]); };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = w.lo[i]; j <= w.hi[i]; ++j) {
      const double local = euclidean(a.frame(i), b.frame(j), a.d);
      const std::size_t here = at(i, j);
      if (i == 0 && j == 0) {
        cost[here] = local;
        len[here] = 1;
        continue;
      }
      double best_cost = kInf;
      std::uint32_t best_len = 0;
      std::uint8_t best_step = kStart;
      auto consider = [&](std::size_t pi, std::size_t pj, std::uint8_t s) {
        const std::size_t p = at(pi, pj);
        if (cost[p] < best_cost || (cost[p] == best_cost && len[p] < best_len)) {
          best_cost = cost[p];
          best_len = len[p];
          best_step = s;
        }
      };
      if (i > 0 && j > 0 && in_row(i - 1, j - 1)) consider(i - 1, j - 1, kDiag);
      if (i > 0 && in_row(i - 1, j)) consider(i - 1, j, kUp);
      if (j > w.lo[i]) consider(i, j - 1, kLeft);
      if (best_step == kStart) continue;  // unreachable cell
      cost[here] = best_cost + local;
      len[here] = best_len + 1;
      if (want_path) step[here] = best_step;
    }
  }

  const std::size_t m = b.n;
  if (!in_row(n - 1, m - 1)) throw KernelError("warping window excludes the end cell");
  const std::size_t end = at(n - 1, m - 1);
  if (!std::isfinite(cost[end])) throw KernelError("warping window admits no complete path");

  WarpPath out;
  out.result = {cost[end], len[end]};
  if (want_path) {
    out.cells.reserve(len[end]);
    std::size_t i = n - 1;
    std::size_t j = m - 1;
    while (true) {
      out.cells.emplace_back(i, j);
      const std::uint8_t s = step[at(i, j)];
      if (s == kStart) break;
      if (s == kDiag) {
        --i;
        --j;
      } else if (s == kUp) {
        --i;
      } else {
        --j;
      }
    }
    std::reverse(out.cells.begin(), out.cells.end());
  }
  return out;
}

// Adjacent-pair averaging; an odd trailing frame is carried over unchanged.
inline std::vector<float> coarsen(const FrameSeq& s) {
  const std::size_t half = (s.n + 1) / 2;
  std::vector<float> out(half * s.d);
  for (std::size_t i = 0; i < half; ++i) {
    const float* x = s.frame(2 * i);
    float* y = out.data() + i * s.d;
    if (2 * i + 1 < s.n) {
      const float* x2 = s.frame(2 * i + 1);
      for (std::size_t k = 0; k < s.d; ++k) y[k] = (x[k] + x2[k]) * 0.5f;
    } else {
      std::copy(x, x + s.d, y);
    }
  }
  return out;
}

// Grow the low-resolution path by `radius` cells, then project each cell onto
// its 2x2 block at the finer resolution.
inline Window expand_window(const std::vector<std::pair<std::size_t, std::size_t>>& coarse_path,
                            std::size_t n, std::size_t m, std::size_t radius) {
  Window w{std::vector<std::size_t>(n, std::numeric_limits<std::size_t>::max()),
           std::vector<std::size_t>(n, 0)};
  const auto r = static_cast<std::int64_t>(radius);
  const auto last_row = static_cast<std::int64_t>(n) - 1;
  const auto last_col = static_cast<std::int64_t>(m) - 1;
  for (const auto& [ci, cj] : coarse_path) {
    const auto i = static_cast<std::int64_t>(ci);
    const auto j = static_cast<std::int64_t>(cj);
    const std::int64_t row_lo = std::max<std::int64_t>(0, 2 * (i - r));
    const std::int64_t row_hi = std::min<std::int64_t>(last_row, 2 * (i + r) + 1);
    const std::int64_t col_lo = std::max<std::int64_t>(0, 2 * (j - r));
    const std::int64_t col_hi = std::min<std::int64_t>(last_col, 2 * (j + r) + 1);
    if (col_lo > col_hi) continue;
    for (std::int64_t row = row_lo; row <= row_hi; ++row) {
      auto& lo = w.lo[static_cast<std::size_t>(row)];
      auto& hi = w.hi[static_cast<std::size_t>(row)];
      lo = std::min(lo, static_cast<std::size_t>(col_lo));
      hi = std::max(hi, static_cast<std::size_t>(col_hi));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (w.lo[i] > w.hi[i]) throw KernelError("projected window leaves a row uncovered");
  }
  return w;
}

inline WarpPath fast_dtw_path(const FrameSeq& a, const FrameSeq& b, std::size_t radius, bool want_path) {
  if (a.n < radius + 2 || b.n < radius + 2) {
    return windowed_dtw(a, b, Window::full(a.n, b.n), want_path);
  }
  const std::vector<float> ca = coarsen(a);
  const std::vector<float> cb = coarsen(b);
  const FrameSeq sa{ca.data(), (a.n + 1) / 2, a.d};
  const FrameSeq sb{cb.data(), (b.n + 1) / 2, b.d};
  const WarpPath coarse = fast_dtw_path(sa, sb, radius, true);
  return windowed_dtw(a, b, expand_window(coarse.cells, a.n, b.n, radius), want_path);
}

inline void check_pair(const SpeechEmbedding& a, const SpeechEmbedding& b) {
  if (a.empty() || b.empty()) throw KernelError("DTW input sequence is empty");
  if (a.dim() != b.dim()) {
    throw KernelError("DTW dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                      std::to_string(b.dim()));
  }
}

inline FrameSeq view(const SpeechEmbedding& s) { return {s.data().data(), s.frames(), s.dim()}; }

}  // namespace detail

// Global optimum over monotone warping paths (match / insert / delete steps).
inline DtwResult exact_dtw(const SpeechEmbedding& a, const SpeechEmbedding& b) {
  detail::check_pair(a, b);
  return detail::windowed_dtw(detail::view(a), detail::view(b), detail::Window::full(a.frames(), b.frames()),
                              false)
      .result;
}

// Multilevel FastDTW: coarsen by half, solve recursively, project the
// low-resolution path with `radius` cells of slack and refine inside that
// window. Sequences shorter than radius + 2 are solved exactly.
inline DtwResult fast_dtw(const SpeechEmbedding& a, const SpeechEmbedding& b, std::size_t radius) {
  detail::check_pair(a, b);
  if (radius < 1) throw KernelError("FastDTW radius must be at least 1");
  return detail::fast_dtw_path(detail::view(a), detail::view(b), radius, false).result;
}

inline std::vector<double> mean_pool(const SpeechEmbedding& s) {
  if (s.empty()) throw KernelError("cannot pool an empty sequence");
  std::vector<double> out(s.dim(), 0.0);
  for (std::size_t i = 0; i < s.frames(); ++i) {
    const auto f = s.frame(i);
    for (std::size_t k = 0; k < s.dim(); ++k) out[k] += static_cast<double>(f[k]);
  }
  const double n = static_cast<double>(s.frames());
  for (double& v : out) v /= n;
  return out;
}

// Zero-norm input yields 0 rather than an error.
inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw KernelError("cosine dimension mismatch: " + std::to_string(u.size()) + " vs " +
                      std::to_string(v.size()));
  }
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    dot += u[k] * v[k];
    nu += u[k] * u[k];
    nv += v[k] * v[k];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

inline double distance_to_similarity(const DtwResult& r) {
  return 1.0 / (1.0 + r.distance / static_cast<double>(r.path_length));
}

// 1 / (1 + distance / path_length), in (0, 1].
inline double frame_level_similarity(const SpeechEmbedding& a, const SpeechEmbedding& b, std::size_t radius) {
  return distance_to_similarity(fast_dtw(a, b, radius));
}

inline double fuse_speech_similarity(const SpeechSimilarityWeights& w, double frame_sim, double utt_sim) {
  return w.w_frame * frame_sim + w.w_utt * utt_sim;
}

// Speech retrieval similarity: weighted frame-level plus pooled cosine.
inline double speech_similarity(const SpeechEmbedding& a, const SpeechEmbedding& b,
                                const SpeechSimilarityWeights& w, std::size_t radius) {
  const double frame_sim = frame_level_similarity(a, b, radius);
  return fuse_speech_similarity(w, frame_sim, cosine(mean_pool(a), mean_pool(b)));
}

}  // namespace mars
