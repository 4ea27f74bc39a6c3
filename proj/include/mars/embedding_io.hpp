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

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "mars/error.hpp"
#include "mars/types.hpp"

namespace mars {

// Embedding payload layout (all little-endian):
//   8 bytes  magic "MARSEMB1"
//   u32      dim
//   u32      n_frames
//   f32[n_frames * dim] frame-major
inline constexpr std::string_view kEmbeddingMagic = "MARSEMB1";
inline constexpr std::size_t kEmbeddingHeaderSize = 16;

namespace detail {

inline void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

inline std::uint32_t get_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_embedding(const SpeechEmbedding& e) {
  std::vector<std::uint8_t> out;
  out.reserve(kEmbeddingHeaderSize + e.data().size() * 4);
  out.insert(out.end(), kEmbeddingMagic.begin(), kEmbeddingMagic.end());
  detail::put_u32_le(out, static_cast<std::uint32_t>(e.dim()));
  detail::put_u32_le(out, static_cast<std::uint32_t>(e.frames()));
  for (float v : e.data()) detail::put_u32_le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline SpeechEmbedding decode_embedding(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kEmbeddingHeaderSize) throw FormatError("embedding payload shorter than header");
  if (std::memcmp(bytes.data(), kEmbeddingMagic.data(), kEmbeddingMagic.size()) != 0) {
    throw FormatError("embedding payload has bad magic");
  }
  const std::uint32_t dim = detail::get_u32_le(bytes.data() + 8);
  const std::uint32_t n_frames = detail::get_u32_le(bytes.data() + 12);
  if (dim == 0) throw FormatError("embedding payload declares dim 0");
  if (n_frames == 0) throw FormatError("embedding payload declares zero frames");
  const std::uint64_t n_values = static_cast<std::uint64_t>(dim) * n_frames;
  if (bytes.size() != kEmbeddingHeaderSize + n_values * 4) {
    throw FormatError("embedding payload size " + std::to_string(bytes.size()) +
                      " does not match header (dim " + std::to_string(dim) + ", frames " +
                      std::to_string(n_frames) + ")");
  }
  std::vector<float> data(n_values);
  const std::uint8_t* p = bytes.data() + kEmbeddingHeaderSize;
  for (std::uint64_t i = 0; i < n_values; ++i, p += 4) {
    data[i] = std::bit_cast<float>(detail::get_u32_le(p));
  }
  return SpeechEmbedding(dim, std::move(data));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline SpeechEmbedding read_embedding(const std::filesystem::path& path) {
  return decode_embedding(read_file_bytes(path));
}

inline void write_embedding(const std::filesystem::path& path, const SpeechEmbedding& e) {
  write_file_bytes(path, encode_embedding(e));
}

}  // namespace mars
