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
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mars/error.hpp"

namespace mars {

// Position of an utterance inside its conversation; ordering by index is
// temporal order.
struct UtteranceId {
  std::string conversation_id;
  std::uint64_t index = 0;

  friend bool operator==(const UtteranceId&, const UtteranceId&) = default;
  friend auto operator<=>(const UtteranceId&, const UtteranceId&) = default;

  // "conversation#index"; also the key form accepted by precomputed vector tables.
  std::string str() const { return conversation_id + "#" + std::to_string(index); }
};

struct UtteranceIdHash {
  std::size_t operator()(const UtteranceId& id) const noexcept {
    return std::hash<std::string>{}(id.conversation_id) ^
           (std::hash<std::uint64_t>{}(id.index) * 0x9e3779b97f4a7c15ULL);
  }
};

// Frame-level speech embedding sequence, stored frame-major.
class SpeechEmbedding {
 public:
  SpeechEmbedding() = default;

  SpeechEmbedding(std::size_t dim, std::vector<float> data) : dim_(dim), data_(std::move(data)) {
    if (dim_ == 0) throw FormatError("speech embedding dimension must be positive");
    if (data_.size() % dim_ != 0) {
      throw FormatError("speech embedding payload of " + std::to_string(data_.size()) +
                        " values is not a multiple of dim " + std::to_string(dim_));
    }
    for (float v : data_) {
      if (!std::isfinite(v)) throw FormatError("speech embedding contains a non-finite value");
    }
  }

  static SpeechEmbedding from_frames(const std::vector<std::vector<float>>& frames) {
    if (frames.empty()) return {};
    const std::size_t d = frames.front().size();
    std::vector<float> flat;
    flat.reserve(frames.size() * d);
    for (const auto& f : frames) {
      if (f.size() != d) throw FormatError("frames of differing dimension");
      flat.insert(flat.end(), f.begin(), f.end());
    }
    return SpeechEmbedding(d, std::move(flat));
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t frames() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> frame(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * dim_, dim_);
  }
  std::span<const float> data() const noexcept { return data_; }

  friend bool operator==(const SpeechEmbedding&, const SpeechEmbedding&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

}  // namespace mars
