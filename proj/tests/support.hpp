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

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mars/mars.hpp"
#include "oracles.hpp"

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mars-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline oracle::Frames random_frames(std::mt19937_64& gen, std::size_t n, std::size_t d) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  oracle::Frames f(n, std::vector<float>(d));
  for (auto& row : f) {
    for (auto& x : row) x = g(gen);
  }
  return f;
}

inline mars::SpeechEmbedding to_embedding(const oracle::Frames& f) { return mars::SpeechEmbedding::from_frames(f); }

// A small database from (conversation, hypothesis) pairs with random speech.
struct Utt {
  std::string conversation;
  std::uint64_t index;
  std::string hypothesis;
  std::string reference;
  std::string language = "en";
};

inline mars::ContextDatabase make_db(const std::vector<Utt>& utts, const mars::TextEmbedder& embedder,
                                     std::uint64_t seed = 7, std::size_t frames = 6, std::size_t dim = 4) {
  std::mt19937_64 gen(seed);
  std::vector<mars::ContextRecord> recs;
  for (const auto& u : utts) {
    recs.push_back(mars::make_record({u.conversation, u.index}, to_embedding(random_frames(gen, frames, dim)),
                                     u.hypothesis, u.language, u.reference, embedder));
  }
  return mars::ContextDatabase::from_records(std::move(recs),
                                             {mars::kDatabaseFormatVersion, embedder.id(), dim, embedder.dim()});
}

inline std::string slurp(const std::filesystem::path& p) {
  const auto bytes = mars::read_file_bytes(p);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace testing_support
