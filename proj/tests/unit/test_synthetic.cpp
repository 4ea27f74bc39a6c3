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

#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace mars;
using testing_support::TempDir;

namespace {

struct Recovery {
  double mars = 0.0;
  double preceding = 0.0;
};

Recovery recovery(const CorpusSpec& spec) {
  const auto corpus = generate_corpus(spec);
  ReferenceNgramEmbedder emb;
  const auto db = corpus_database(corpus, emb);
  std::size_t n = 0, mars_hits = 0, prev_hits = 0;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const auto& u = corpus.utterances[i];
    if (!u.designated) continue;
    ++n;
    const auto choice = choose_context(db, db.records()[i], DecodeMode::mars, {});
    mars_hits += choice.contexts.at(0)->id.index == *u.designated;
    prev_hits += u.row.index - 1 == *u.designated;
  }
  return {static_cast<double>(mars_hits) / n, static_cast<double>(prev_hits) / n};
}

}  // namespace

TEST_CASE("generation is seeded") {
  CorpusSpec spec;
  spec.n_conversations = 2;
  spec.utterances_per_conversation = 6;
  const auto a = generate_corpus(spec);
  const auto b = generate_corpus(spec);
  REQUIRE(a.utterances.size() == 12);
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    CHECK(a.utterances[i].row.reference == b.utterances[i].row.reference);
    CHECK(a.utterances[i].row.hypothesis == b.utterances[i].row.hypothesis);
    CHECK(a.utterances[i].speech == b.utterances[i].speech);
  }
  spec.seed += 1;
  CHECK(generate_corpus(spec).utterances[0].row.reference != a.utterances[0].row.reference);

  TempDir x("gen-x");
  TempDir y("gen-y");
  write_corpus(a, x.path());
  write_corpus(b, y.path());
  CHECK(testing_support::slurp(x.path() / "manifest.jsonl") == testing_support::slurp(y.path() / "manifest.jsonl"));
  CHECK(testing_support::slurp(x.path() / a.utterances[5].row.embedding_path) ==
        testing_support::slurp(y.path() / b.utterances[5].row.embedding_path));
}

TEST_CASE("gap fixed at one designates the preceding utterance") {
  CorpusSpec spec;
  spec.n_conversations = 3;
  spec.utterances_per_conversation = 10;
  spec.gap_min = spec.gap_max = 1;
  for (const auto& u : generate_corpus(spec).utterances) {
    if (u.row.index == 0) {
      CHECK_FALSE(u.designated);
    } else {
      CHECK(*u.designated == u.row.index - 1);
    }
  }
}

TEST_CASE("corpus statistics") {
  CorpusSpec spec;
  const auto corpus = generate_corpus(spec);
  const auto s = corpus_stats(corpus);
  // expected mean of uniform(1, min(9, i)) over positions 1..39
  double expect = 0.0;
  for (std::size_t i = 1; i < 40; ++i) expect += (1.0 + std::min<double>(9, i)) / 2.0;
  expect /= 39.0;
  CHECK(s.mean_gap == Catch::Approx(expect).margin(0.15));
  CHECK(s.designated_count == 50 * 39);
  // 4 of 11 tokens are copied, plus any filler collisions
  CHECK(s.token_overlap >= 4.0 / 11.0);
  CHECK(s.token_overlap <= 5.0 / 11.0);
}

TEST_CASE("written corpus builds the same database as memory") {
  CorpusSpec spec;
  spec.n_conversations = 2;
  spec.utterances_per_conversation = 4;
  const auto corpus = generate_corpus(spec);
  TempDir dir("gen-db");
  write_corpus(corpus, dir.path());
  ReferenceNgramEmbedder emb;
  const auto from_disk = build_database(dir.path() / "manifest.jsonl", emb);
  const auto from_mem = corpus_database(corpus, emb);
  REQUIRE(from_disk.size() == from_mem.size());
  for (std::size_t i = 0; i < from_mem.size(); ++i) {
    CHECK(from_disk.records()[i].speech == from_mem.records()[i].speech);
    CHECK(from_disk.records()[i].text_vec == from_mem.records()[i].text_vec);
  }
}

TEST_CASE("multi-modal selection recovers designated contexts under low noise") {
  CorpusSpec spec;
  spec.gap_min = 1;
  spec.gap_max = 10;
  spec.frame_noise = 0.1;
  spec.hypothesis_error_rate = 0.1;
  const auto r = recovery(spec);
  CHECK(r.mars >= 0.80);
  CHECK(r.mars > r.preceding);
}

TEST_CASE("selection beats preceding-1 whenever the mean gap exceeds two") {
  for (std::size_t gap_max : {4u, 6u, 12u}) {
    CorpusSpec spec;
    spec.n_conversations = 10;
    spec.gap_min = 2;
    spec.gap_max = gap_max;
    spec.seed = 100 + gap_max;
    const auto r = recovery(spec);
    CHECK(r.mars > r.preceding);
  }
}

TEST_CASE("invalid specs") {
  CorpusSpec spec;
  spec.shared_tokens = spec.own_tokens + 1;
  CHECK_THROWS_AS(generate_corpus(spec), ConfigError);
  spec = {};
  spec.gap_min = 0;
  CHECK_THROWS_AS(generate_corpus(spec), ConfigError);
  spec = {};
  spec.embedding_dim = 0;
  CHECK_THROWS_AS(generate_corpus(spec), ConfigError);
}
