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

#include <fstream>

#include "support.hpp"

using namespace mars;
using testing_support::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p) << s;
}

}  // namespace

TEST_CASE("utterance ids") {
  UtteranceId a{"conv", 3};
  UtteranceId b{"conv", 10};
  CHECK(a < b);
  CHECK(a.str() == "conv#3");
  CHECK(UtteranceIdHash{}(a) != UtteranceIdHash{}(b));
}

TEST_CASE("speech embedding validation") {
  CHECK_THROWS_AS(SpeechEmbedding(0, {}), FormatError);
  CHECK_THROWS_AS(SpeechEmbedding(2, {1, 2, 3}), FormatError);
  CHECK_THROWS_AS(SpeechEmbedding(1, {std::numeric_limits<float>::infinity()}), FormatError);
  const SpeechEmbedding e(2, {1, 2, 3, 4});
  CHECK(e.frames() == 2);
  CHECK(e.frame(1)[0] == 3.0f);
}

TEST_CASE("embedding payload round trip") {
  TempDir dir("emb");
  const SpeechEmbedding e(3, {0.5f, -1.25f, 3.0f, 1e-7f, 42.0f, -0.0f});
  write_embedding(dir.path() / "x" / "e.emb", e);
  CHECK(read_embedding(dir.path() / "x" / "e.emb") == e);

  auto bytes = encode_embedding(e);
  CHECK(bytes.size() == kEmbeddingHeaderSize + 6 * 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "MARSEMB1");

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_embedding(bad_magic), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_embedding(truncated), FormatError);
  CHECK_THROWS_AS(decode_embedding(std::vector<std::uint8_t>(4, 0)), FormatError);
  CHECK_THROWS_AS(read_embedding(dir.path() / "missing.emb"), IngestionError);
}

TEST_CASE("manifest parsing") {
  const auto row = parse_manifest_line(
      R"({"conversation_id":"c1","index":2,"language":"en","hypothesis":"hi there","reference":"hi there","embedding_path":"e/2.emb"})");
  CHECK(row.id() == UtteranceId{"c1", 2});
  CHECK(row.reference == std::optional<std::string>("hi there"));
  CHECK_FALSE(parse_manifest_line(
                  R"({"conversation_id":"c1","index":2,"language":"en","hypothesis":"h","embedding_path":"e"})")
                  .reference);
  CHECK_THROWS_AS(parse_manifest_line(R"({"conversation_id":"c1"})"), FormatError);
  CHECK_THROWS_AS(parse_manifest_line("not json"), FormatError);
}

TEST_CASE("building a database from a manifest") {
  TempDir dir("build");
  const SpeechEmbedding e(2, {1, 2, 3, 4});
  write_embedding(dir.path() / "e" / "a1.emb", e);
  write_embedding(dir.path() / "e" / "a0.emb", e);
  write_text(dir.path() / "m.jsonl",
             R"({"conversation_id":"a","index":1,"language":"en","hypothesis":"second","embedding_path":"e/a1.emb"})"
             "\n"
             R"({"conversation_id":"a","index":0,"language":"en","hypothesis":"first","embedding_path":"e/a0.emb"})"
             "\n");
  ReferenceNgramEmbedder emb;
  const auto db = build_database(dir.path() / "m.jsonl", emb);
  REQUIRE(db.size() == 2);
  CHECK(db.records()[0].id.index == 0);
  CHECK(db.records()[1].hypothesis == "second");
  CHECK(db.metadata().speech_dim == 2);

  write_text(dir.path() / "bad.jsonl",
             R"({"conversation_id":"a","index":7,"language":"en","hypothesis":"x","embedding_path":"e/nope.emb"})"
             "\n");
  try {
    build_database(dir.path() / "bad.jsonl", emb);
    FAIL("expected an ingestion error");
  } catch (const IngestionError& err) {
    CHECK(std::string(err.what()).find("a#7") != std::string::npos);
  }

  write_text(dir.path() / "dup.jsonl",
             R"({"conversation_id":"a","index":0,"language":"en","hypothesis":"x","embedding_path":"e/a0.emb"})"
             "\n"
             R"({"conversation_id":"a","index":0,"language":"en","hypothesis":"y","embedding_path":"e/a1.emb"})"
             "\n");
  CHECK_THROWS_AS(build_database(dir.path() / "dup.jsonl", emb), ManifestError);
}

TEST_CASE("history is causal and per conversation") {
  ReferenceNgramEmbedder emb;
  std::vector<testing_support::Utt> utts;
  for (std::uint64_t i = 0; i < 100; ++i) {
    utts.push_back({"x", i, "x" + std::to_string(i), ""});
    if (i < 30) utts.push_back({"y", i, "y" + std::to_string(i), ""});
  }
  const auto db = testing_support::make_db(utts, emb, 3, 2, 2);

  const auto h = history_of(db, {"x", 50});
  REQUIRE(h.size() == 50);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(h[i].id == UtteranceId{"x", i});

  CHECK(history_of(db, {"x", 0}).empty());
  CHECK(history_of(db, {"y", 3}).size() == 3);

  // brute-force filter over all records
  for (const auto& cur : db.records()) {
    std::vector<UtteranceId> want;
    for (const auto& r : db.records()) {
      if (r.id.conversation_id == cur.id.conversation_id && r.id.index < cur.id.index) want.push_back(r.id);
    }
    std::vector<UtteranceId> got;
    for (const auto& r : history_of(db, cur.id)) got.push_back(r.id);
    CHECK(got == want);
  }
  CHECK_THROWS_AS(history_of(db, {"nope", 1}), LookupError);
  CHECK_THROWS_AS(db.at({"x", 500}), LookupError);
}

TEST_CASE("cached pooled and text vectors match recomputation") {
  CorpusSpec spec;
  spec.n_conversations = 2;
  spec.utterances_per_conversation = 10;
  ReferenceNgramEmbedder emb;
  const auto db = corpus_database(generate_corpus(spec), emb);
  for (const auto& r : db.records()) {
    const auto pooled = mean_pool(r.speech);
    const auto tv = emb.embed(r.hypothesis, nullptr);
    for (std::size_t k = 0; k < pooled.size(); ++k) CHECK(std::abs(pooled[k] - r.pooled[k]) <= 1e-6);
    for (std::size_t k = 0; k < tv.size(); ++k) CHECK(std::abs(tv[k] - r.text_vec[k]) <= 1e-6);
  }
}

TEST_CASE("database save and load round trip") {
  CorpusSpec spec;
  spec.n_conversations = 3;
  spec.utterances_per_conversation = 5;
  ReferenceNgramEmbedder emb;
  const auto db = corpus_database(generate_corpus(spec), emb);
  TempDir a("save-a");
  TempDir b("save-b");
  save_database(db, a.path());
  const auto loaded = load_database(a.path(), emb);
  REQUIRE(loaded.size() == db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    CHECK(loaded.records()[i].id == db.records()[i].id);
    CHECK(loaded.records()[i].speech == db.records()[i].speech);
    CHECK(loaded.records()[i].hypothesis == db.records()[i].hypothesis);
    CHECK(loaded.records()[i].text_vec == db.records()[i].text_vec);
  }
  save_database(loaded, b.path());
  CHECK(testing_support::slurp(a.path() / "manifest.jsonl") == testing_support::slurp(b.path() / "manifest.jsonl"));
  CHECK(testing_support::slurp(a.path() / "metadata.json") == testing_support::slurp(b.path() / "metadata.json"));

  ReferenceNgramEmbedder other(64);
  CHECK_THROWS_AS(load_database(a.path(), other), ConfigError);
}

TEST_CASE("rebuild keeps speech and swaps hypotheses") {
  ReferenceNgramEmbedder emb;
  const auto db = testing_support::make_db({{"c", 0, "old zero", ""}, {"c", 1, "old one", ""}}, emb);
  std::unordered_map<UtteranceId, std::string, UtteranceIdHash> hyps = {{{"c", 0}, "new zero"}};
  const auto next = rebuild_with_hypotheses(db, hyps, emb);
  CHECK(next.records()[0].hypothesis == "new zero");
  CHECK(next.records()[1].hypothesis == "old one");
  CHECK(next.records()[0].speech == db.records()[0].speech);
  CHECK(next.records()[0].text_vec == emb.embed("new zero", nullptr));
}
