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

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mars/decoding.hpp"
#include "mars/error.hpp"
#include "mars/metrics.hpp"
#include "mars/synthetic.hpp"

namespace mars {

// Flat "key = value" text; '#' starts a comment. Dashes in keys are read as
// underscores so file keys may mirror flag names.
inline std::vector<std::pair<std::string, std::string>> read_kv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    for (char& c : key) c = c == '-' ? '_' : c;
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

namespace detail {

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("bad value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

inline double parse_double(std::string_view key, std::string_view value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(value), &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad value '" + std::string(value) + "' for " + std::string(key));
  }
}

}  // namespace detail

struct RunConfig {
  std::size_t k = 3;
  double w_frame = 0.5;
  std::size_t radius = 1;
  double mask_p = 0.5;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t preceding_n = 1;
  MerMode mer_mode = MerMode::macro;
  std::string backend = "mock";
  std::string embedder = "reference";
  std::size_t text_dim = kDefaultTextDim;
  double mock_base_rate = 0.15;
  double mock_context_rate = 0.02;

  void set(const std::string& key, const std::string& value) {
    using detail::parse_double;
    using detail::parse_number;
    if (key == "k") {
      k = parse_number<std::size_t>(key, value);
    } else if (key == "w_frame") {
      w_frame = parse_double(key, value);
    } else if (key == "radius") {
      radius = parse_number<std::size_t>(key, value);
    } else if (key == "mask_p") {
      mask_p = parse_double(key, value);
    } else if (key == "seed") {
      seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "workers") {
      workers = parse_number<std::size_t>(key, value);
    } else if (key == "n" || key == "preceding_n") {
      preceding_n = parse_number<std::size_t>(key, value);
    } else if (key == "mer_mode") {
      if (value == "macro") {
        mer_mode = MerMode::macro;
      } else if (value == "micro") {
        mer_mode = MerMode::micro;
      } else {
        throw ConfigError("mer_mode must be macro or micro");
      }
    } else if (key == "backend") {
      backend = value;
    } else if (key == "embedder") {
      embedder = value;
    } else if (key == "text_dim") {
      text_dim = parse_number<std::size_t>(key, value);
    } else if (key == "mock_base_rate") {
      mock_base_rate = parse_double(key, value);
    } else if (key == "mock_context_rate") {
      mock_context_rate = parse_double(key, value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  void validate() const {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (!(w_frame >= 0.0 && w_frame <= 1.0)) throw ConfigError("w-frame must lie in [0, 1]");
    if (radius < 1) throw ConfigError("radius must be at least 1");
    if (!(mask_p >= 0.0 && mask_p <= 1.0)) throw ConfigError("mask-p must lie in [0, 1]");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (preceding_n < 1) throw ConfigError("n must be at least 1");
    if (text_dim < 16) throw ConfigError("text-dim must be at least 16");
    if (!(mock_base_rate >= 0.0 && mock_base_rate <= 1.0) || !(mock_context_rate >= 0.0 && mock_context_rate <= 1.0)) {
      throw ConfigError("mock rates must lie in [0, 1]");
    }
    if (backend != "mock" && backend != "echo" && backend.rfind("external:", 0) != 0) {
      throw ConfigError("backend must be mock, echo or external:<endpoint>");
    }
    if (embedder != "reference" && embedder.rfind("precomputed:", 0) != 0) {
      throw ConfigError("embedder must be reference or precomputed:<path>");
    }
  }

  DecodeParams decode_params() const {
    DecodeParams p;
    p.retrieval.k = k;
    p.retrieval.weights = SpeechSimilarityWeights::from_frame_weight(w_frame);
    p.retrieval.radius = radius;
    p.preceding_n = preceding_n;
    p.workers = workers;
    return p;
  }

  // Echoed into output headers. Worker count is left out: it never changes
  // results, and outputs must not depend on it.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["k"] = k;
    j["w_frame"] = w_frame;
    j["w_utt"] = 1.0 - w_frame;
    j["radius"] = radius;
    j["mask_p"] = mask_p;
    j["seed"] = seed;
    j["preceding_n"] = preceding_n;
    j["mer_mode"] = to_string(mer_mode);
    j["backend"] = backend;
    j["embedder"] = embedder;
    j["text_dim"] = text_dim;
    j["mock_base_rate"] = mock_base_rate;
    j["mock_context_rate"] = mock_context_rate;
    return j;
  }
};

inline void apply_corpus_key(CorpusSpec& spec, const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_number;
  if (key == "n_conversations") {
    spec.n_conversations = parse_number<std::size_t>(key, value);
  } else if (key == "utterances_per_conversation") {
    spec.utterances_per_conversation = parse_number<std::size_t>(key, value);
  } else if (key == "languages") {
    spec.languages.clear();
    std::string cur;
    for (char c : value + ",") {
      if (c == ',') {
        if (!cur.empty()) spec.languages.push_back(cur);
        cur.clear();
      } else if (c != ' ') {
        cur.push_back(c);
      }
    }
  } else if (key == "own_tokens") {
    spec.own_tokens = parse_number<std::size_t>(key, value);
  } else if (key == "shared_tokens") {
    spec.shared_tokens = parse_number<std::size_t>(key, value);
  } else if (key == "filler_tokens") {
    spec.filler_tokens = parse_number<std::size_t>(key, value);
  } else if (key == "filler_pool") {
    spec.filler_pool = parse_number<std::size_t>(key, value);
  } else if (key == "gap_min") {
    spec.gap_min = parse_number<std::size_t>(key, value);
  } else if (key == "gap_max") {
    spec.gap_max = parse_number<std::size_t>(key, value);
  } else if (key == "embedding_dim") {
    spec.embedding_dim = parse_number<std::size_t>(key, value);
  } else if (key == "frames_per_token") {
    spec.frames_per_token = parse_number<std::size_t>(key, value);
  } else if (key == "frame_noise") {
    spec.frame_noise = parse_double(key, value);
  } else if (key == "drift_step") {
    spec.drift_step = parse_double(key, value);
  } else if (key == "hypothesis_error_rate") {
    spec.hypothesis_error_rate = parse_double(key, value);
  } else if (key == "seed") {
    spec.seed = parse_number<std::uint64_t>(key, value);
  } else {
    throw ConfigError("unknown corpus spec key '" + key + "'");
  }
}

}  // namespace mars
