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

#include <mutex>

#include "support.hpp"

using namespace mars;

namespace {

// Records every bundle it sees; answers with the hypothesis.
class Recorder final : public AsrBackend {
 public:
  std::string id() const override { return "recorder"; }
  std::string transcribe(const PromptBundle& b) const override {
    std::lock_guard lock(mu_);
    seen_.push_back(b);
    return b.current_hypothesis;
  }
  mutable std::mutex mu_;
  mutable std::vector<PromptBundle> seen_;
};

class FailOn final : public AsrBackend {
 public:
  explicit FailOn(UtteranceId bad) : bad_(std::move(bad)) {}
  std::string id() const override { return "fail-on"; }
  std::string transcribe(const PromptBundle& b) const override {
    if (b.utterance_ref == bad_) throw BackendError("boom");
    return "ok";
  }
  UtteranceId bad_;
};

ContextDatabase small_corpus(std::size_t convs = 2, std::size_t utts = 12) {
  CorpusSpec spec;
  spec.n_conversations = convs;
  spec.utterances_per_conversation = utts;
  static ReferenceNgramEmbedder emb;
  return corpus_database(generate_corpus(spec), emb);
}

}  // namespace

TEST_CASE("language prompts") {
  CHECK(language_prompt("en") == "Please transcribe the speech into text.");
  CHECK(language_prompt("ja") != language_prompt("en"));
  CHECK(language_prompt("Japanese") == language_prompt("ja"));
  CHECK(language_prompt("ja-JP") == language_prompt("ja"));
  CHECK_THROWS_AS(language_prompt("xx"), ConfigError);
}

TEST_CASE("prompt assembly") {
  ReferenceNgramEmbedder emb;
  const auto db = testing_support::make_db({{"c", 0, "earlier words", ""}, {"c", 1, "current words", ""}}, emb);
  const auto& cur = db.records()[1];
  const auto none = assemble_prompt(cur, nullptr);
  CHECK_FALSE(none.context_hypothesis);
  CHECK(none.current_hypothesis == "current words");
  CHECK(none.utterance_ref == cur.id);
  const auto with = assemble_prompt(cur, &db.records()[0]);
  CHECK(with.context_hypothesis == std::optional<std::string>("earlier words"));
}

TEST_CASE("decode modes are causal and first utterances are context-free") {
  const auto db = small_corpus();
  ReferenceNgramEmbedder emb;
  EchoBackend echo;
  DecodeParams p;
  p.preceding_n = 2;
  for (auto mode : {DecodeMode::direct, DecodeMode::mars, DecodeMode::two_pass, DecodeMode::preceding_n,
                    DecodeMode::sum_top1, DecodeMode::speech_only, DecodeMode::text_only}) {
    const auto out = decode_corpus(db, mode, echo, emb, p);
    REQUIRE(out.size() == db.size());
    for (const auto& r : out) {
      for (const auto& c : r.context_ids) {
        CHECK(c.conversation_id == r.id.conversation_id);
        CHECK(c.index < r.id.index);
      }
      if (r.id.index == 0) {
        CHECK(r.context_ids.empty());
        CHECK_FALSE(r.bundle.context_hypothesis);
      }
      if (mode == DecodeMode::direct) CHECK(r.context_ids.empty());
    }
  }
}

TEST_CASE("echo backend reproduces stored hypotheses") {
  const auto db = small_corpus(1, 5);
  EchoBackend echo;
  const auto out = decode_direct(db, db.conversation_ids()[0], echo);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].transcription == db.records()[i].hypothesis);
}

TEST_CASE("one-utterance conversation") {
  ReferenceNgramEmbedder emb;
  const auto db = testing_support::make_db({{"solo", 0, "only one", ""}}, emb);
  EchoBackend echo;
  CHECK(decode_direct(db, "solo", echo).size() == 1);
  const auto m = decode_mars(db, "solo", echo);
  REQUIRE(m.size() == 1);
  CHECK(m[0].context_ids.empty());
}

TEST_CASE("a dominating context is the one decoded with") {
  ReferenceNgramEmbedder emb;
  std::vector<ContextRecord> recs;
  const SpeechEmbedding base(2, {0, 0, 1, 1, 2, 2, 3, 3});
  const SpeechEmbedding far(2, {9, -9, -7, 8, 5, 5, -3, 0});
  recs.push_back(make_record({"c", 0}, base, "budget review for the quarter", "en", {}, emb));
  recs.push_back(make_record({"c", 1}, far, "lunch order pizza", "en", {}, emb));
  recs.push_back(make_record({"c", 2}, base, "budget review for the quarter again", "en", {}, emb));
  const auto db = ContextDatabase::from_records(std::move(recs), {kDatabaseFormatVersion, emb.id(), 2, emb.dim()});
  EchoBackend echo;
  const auto out = decode_mars(db, "c", echo);
  REQUIRE(out[2].context_ids.size() == 1);
  CHECK(out[2].context_ids[0].index == 0);
  CHECK(out[2].bundle.context_hypothesis == std::optional<std::string>("budget review for the quarter"));
  CHECK(out[2].closeness == std::optional<double>(1.0));
}

TEST_CASE("worker count never changes results") {
  const auto db = small_corpus(3, 10);
  ReferenceNgramEmbedder emb;
  MockAsrBackend mock(db, {0.2, 0.05, 9});
  DecodeParams one;
  DecodeParams four;
  four.workers = 4;
  for (auto mode : {DecodeMode::mars, DecodeMode::two_pass}) {
    const auto a = decode_corpus(db, mode, mock, emb, one);
    const auto b = decode_corpus(db, mode, mock, emb, four);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].transcription == b[i].transcription);
      CHECK(a[i].context_ids == b[i].context_ids);
    }
  }
}

TEST_CASE("two-pass rebuilds the database from pass-1 output") {
  const auto db = small_corpus(1, 8);
  ReferenceNgramEmbedder emb;
  EchoBackend echo;
  ContextDatabase second;
  decode_two_pass(db, db.records(), echo, emb, {}, &second);
  for (std::size_t i = 0; i < db.size(); ++i) CHECK(second.records()[i].hypothesis == db.records()[i].hypothesis);

  MockAsrBackend mock(db, {0.0, 0.0, 1});
  decode_two_pass(db, db.records(), mock, emb, {}, &second);
  for (std::size_t i = 0; i < db.size(); ++i) {
    CHECK(second.records()[i].hypothesis == text::encode_utf8(text::normalize(*db.records()[i].reference)));
  }
}

TEST_CASE("backend failures") {
  const auto db = small_corpus(1, 4);
  ReferenceNgramEmbedder emb;
  FailOn fail({db.conversation_ids()[0], 2});
  const auto out = decode_records(db, db.records(), DecodeMode::mars, fail, {});
  CHECK(has_failures(out));
  CHECK(out[2].error);
  CHECK(out[2].transcription.empty());
  CHECK_FALSE(out[1].error);
  CHECK_THROWS_AS(decode_two_pass(db, db.records(), fail, emb, {}), BackendError);
}

TEST_CASE("mock backend rewards relevant context") {
  ReferenceNgramEmbedder emb;
  const auto db = testing_support::make_db({{"c", 0, "", "alpha beta gamma delta epsilon"}}, emb);
  MockAsrBackend mock(db, {1.0, 0.0, 3});
  PromptBundle b = assemble_prompt(db.records()[0], nullptr);
  CHECK(mock.transcribe(b) != "alpha beta gamma delta epsilon");
  b.context_hypothesis = "alpha beta gamma delta epsilon";
  CHECK(mock.transcribe(b) == "alpha beta gamma delta epsilon");
  CHECK(mock.transcribe(b) == mock.transcribe(b));

  const auto labeled = testing_support::make_db({{"c", 0, "h", ""}}, emb);
  std::vector<ContextRecord> recs(labeled.records().begin(), labeled.records().end());
  recs[0].reference.reset();
  const auto no_ref = ContextDatabase::from_records(recs, labeled.metadata());
  MockAsrBackend mock2(no_ref, {});
  CHECK_THROWS_AS(mock2.transcribe(assemble_prompt(no_ref.records()[0], nullptr)), BackendError);
}

TEST_CASE("context masking") {
  std::vector<TrainingExample> exs(10000);
  for (auto& e : exs) e.bundle.context_hypothesis = "ctx";

  const auto none = mask_contexts(exs, 0.0, 5);
  CHECK(std::none_of(none.begin(), none.end(), [](const auto& e) { return e.masked; }));
  const auto all = mask_contexts(exs, 1.0, 5);
  CHECK(std::all_of(all.begin(), all.end(), [](const auto& e) { return e.masked && !e.bundle.context_hypothesis; }));

  const auto half = mask_contexts(exs, 0.5, 0);
  const auto masked = std::count_if(half.begin(), half.end(), [](const auto& e) { return e.masked; });
  CHECK(masked >= 4800);
  CHECK(masked <= 5200);
  CHECK(mask_contexts(exs, 0.5, 0) == half);
  CHECK_THROWS_AS(mask_contexts(exs, 1.5, 0), ConfigError);
}

TEST_CASE("training examples carry references as targets") {
  const auto db = small_corpus(1, 6);
  const auto exs = build_training_examples(db, {});
  REQUIRE(exs.size() == 6);
  for (std::size_t i = 0; i < exs.size(); ++i) CHECK(exs[i].target == *db.records()[i].reference);
  CHECK_FALSE(exs[0].bundle.context_hypothesis);

  ReferenceNgramEmbedder emb;
  const auto unlabeled = testing_support::make_db({{"c", 0, "h", ""}}, emb);
  std::vector<ContextRecord> recs(unlabeled.records().begin(), unlabeled.records().end());
  recs[0].reference.reset();
  const auto db2 = ContextDatabase::from_records(recs, unlabeled.metadata());
  CHECK_THROWS_AS(build_training_examples(db2, {}), FormatError);
}
