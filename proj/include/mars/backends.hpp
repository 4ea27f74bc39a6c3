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
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "mars/core.hpp"
#include "mars/decoding.hpp"
#include "mars/rng.hpp"
#include "mars/text.hpp"

namespace mars {

// Returns the current hypothesis unchanged.
class EchoBackend final : public AsrBackend {
 public:
  std::string id() const override { return "echo"; }
  std::string transcribe(const PromptBundle& bundle) const override { return bundle.current_hypothesis; }
};

struct MockBackendOptions {
  double base_rate = 0.15;     // per-token corruption rate without help
  double context_rate = 0.02;  // rate for tokens that occur in the context hypothesis
  std::uint64_t seed = 0;
};

// Reference-driven stand-in for an LLM-ASR model. It emits the hidden
// reference with seeded token corruptions; a token that also appears in the
// prompt's context hypothesis is corrupted at the lower context rate, so
// output quality tracks context relevance.
//
// Each token's draw depends only on (seed, utterance id, token position),
// which keeps output independent of scheduling and makes the same token
// fail or survive consistently across decoding modes.
class MockAsrBackend final : public AsrBackend {
 public:
  MockAsrBackend(const ContextDatabase& db, MockBackendOptions opts) : opts_(opts) {
    if (!(opts_.base_rate >= 0.0 && opts_.base_rate <= 1.0) ||
        !(opts_.context_rate >= 0.0 && opts_.context_rate <= 1.0)) {
      throw ConfigError("mock backend rates must lie in [0, 1]");
    }
    for (const auto& r : db.records()) {
      if (r.reference) references_.emplace(r.id, *r.reference);
    }
    stream_ = derive_seed(opts_.seed, "mock-backend");
  }

  std::string id() const override {
    return "mock(base=" + std::to_string(opts_.base_rate) + ",context=" + std::to_string(opts_.context_rate) + ")";
  }

  std::string transcribe(const PromptBundle& bundle) const override {
    auto it = references_.find(bundle.utterance_ref);
    if (it == references_.end()) {
      throw BackendError("mock backend has no reference for " + bundle.utterance_ref.str());
    }
    std::unordered_set<std::string> context_tokens;
    if (bundle.context_hypothesis) {
      for (auto& t : text::words(*bundle.context_hypothesis)) context_tokens.insert(std::move(t));
    }
    const std::uint64_t utt_seed = splitmix64(stream_ ^ fnv1a64(bundle.utterance_ref.str()));
    std::string out;
    std::uint64_t pos = 0;
    for (const auto& token : text::words(it->second)) {
      const double u = to_unit_interval(splitmix64(utt_seed + pos++));
      const double p = context_tokens.count(token) ? opts_.context_rate : opts_.base_rate;
      if (!out.empty()) out.push_back(' ');
      out += u < p ? text::garble(token) : token;
    }
    return out;
  }

 private:
  MockBackendOptions opts_;
  std::uint64_t stream_ = 0;
  std::unordered_map<UtteranceId, std::string, UtteranceIdHash> references_;
};

}  // namespace mars
