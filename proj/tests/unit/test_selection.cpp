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

#include <random>

#include "support.hpp"

using namespace mars;
using Catch::Approx;

namespace {

DecisionMatrix matrix(std::vector<std::pair<double, double>> rows) {
  DecisionMatrix m;
  std::uint64_t i = 0;
  for (auto [s, t] : rows) m.rows.push_back({s, t, i++});
  return m;
}

}  // namespace

TEST_CASE("column normalisation") {
  const auto m = normalize_matrix(matrix({{3, 1}, {4, 1}}));
  CHECK(m.sr[0] == Approx(0.6).epsilon(1e-15));
  CHECK(m.sr[1] == Approx(0.8).epsilon(1e-15));

  const auto one = normalize_matrix(matrix({{0.3, 0.9}}));
  CHECK(one.sr[0] == Approx(1.0));
  CHECK(one.tr[0] == Approx(1.0));

  const auto zeros = normalize_matrix(matrix({{0, 0.5}, {0, 0.2}}));
  CHECK(zeros.sr == std::vector<double>{0.0, 0.0});

  const auto neg = normalize_matrix(matrix({{-3, 1}, {4, 1}}));
  CHECK(neg.sr[0] == Approx(-0.6));

  CHECK_THROWS_AS(normalize_matrix(DecisionMatrix{}), SelectionError);
  CHECK_THROWS_AS(normalize_matrix(matrix({{std::nan(""), 1}})), SelectionError);
}

TEST_CASE("ideal points") {
  const auto m = normalize_matrix(matrix({{3, 1}, {4, 2}}));
  const auto ip = ideal_points(m);
  CHECK(ip.sa_plus == Approx(0.8));
  CHECK(ip.sa_minus == Approx(0.6));

  const auto single = normalize_matrix(matrix({{0.2, 0.7}}));
  const auto sp = ideal_points(single);
  CHECK(sp.sa_plus == sp.sa_minus);
  CHECK(sp.ta_plus == sp.ta_minus);

  const auto a = ideal_points(normalize_matrix(matrix({{0.1, 0.9}, {0.5, 0.2}, {0.3, 0.4}})));
  const auto b = ideal_points(normalize_matrix(matrix({{0.3, 0.4}, {0.1, 0.9}, {0.5, 0.2}})));
  // column norms are summed in row order, so allow for the last bit
  CHECK(a.sa_plus == Approx(b.sa_plus).epsilon(1e-14));
  CHECK(a.ta_plus == Approx(b.ta_plus).epsilon(1e-14));
  CHECK(a.sa_minus == Approx(b.sa_minus).epsilon(1e-14));
  CHECK(a.ta_minus == Approx(b.ta_minus).epsilon(1e-14));

  CHECK_THROWS_AS(ideal_points(matrix({{1, 1}})), SelectionError);
}

TEST_CASE("relative closeness") {
  const auto dom = rank_matrix(matrix({{0.8, 0.8}, {0.6, 0.6}}));
  CHECK(dom.ranking.closeness[0] == Approx(1.0));
  CHECK(dom.ranking.closeness[1] == Approx(0.0).margin(1e-15));
  CHECK(dom.ranking.best_index == 0);

  const auto sym = rank_matrix(matrix({{1, 0}, {0, 1}}));
  CHECK(sym.ranking.closeness[0] == Approx(0.5));
  CHECK(sym.ranking.closeness[1] == Approx(0.5));
  CHECK(sym.ranking.best_index == 1);  // exact tie goes to the more recent row

  const auto same = rank_matrix(matrix({{0.4, 0.4}, {0.4, 0.4}}));
  CHECK(same.ranking.closeness[0] == 0.5);
}

TEST_CASE("closeness matches the oracle on random 5x2 matrices") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> sw(5), tw(5);
    std::vector<std::uint64_t> rec(5);
    DecisionMatrix m;
    for (std::size_t i = 0; i < 5; ++i) {
      sw[i] = u(gen);
      tw[i] = u(gen);
      rec[i] = i;
      m.rows.push_back({sw[i], tw[i], rec[i]});
    }
    const auto lib = rank_matrix(m);
    const auto ref = oracle::topsis(sw, tw, rec);
    for (std::size_t i = 0; i < 5; ++i) CHECK(lib.ranking.closeness[i] == Approx(ref.closeness[i]).margin(1e-12));
    CHECK(lib.ranking.best_index == ref.best);
  }
}

TEST_CASE("select_best and baselines on candidates") {
  ReferenceNgramEmbedder emb;
  const auto db = testing_support::make_db({{"c", 0, "alpha", "alpha"}, {"c", 1, "beta", "beta"}}, emb);
  const auto recs = db.records();

  auto cand = [](const ContextRecord& r, double sw, double tw) {
    RetrievalCandidate c;
    c.record = &r;
    c.sw = sw;
    c.tw = tw;
    return c;
  };

  const std::vector<RetrievalCandidate> one = {cand(recs[0], 0.1, 0.2)};
  CHECK(select_best(one).record == &recs[0]);
  CHECK(select_sum_top1(one).record == &recs[0]);

  const std::vector<RetrievalCandidate> two = {cand(recs[0], 0.9, 0.0), cand(recs[1], 0.1, 0.85)};
  CHECK(select_sum_top1(two).record == &recs[1]);

  const std::vector<RetrievalCandidate> dominant = {cand(recs[0], 0.9, 0.8), cand(recs[1], 0.2, 0.1)};
  CHECK(select_best(dominant).record == &recs[0]);
  CHECK(select_sum_top1(dominant).record == &recs[0]);

  CHECK_THROWS_AS(select_best(std::span<const RetrievalCandidate>{}), SelectionError);
  RetrievalCandidate partial;
  partial.record = &recs[0];
  partial.sw = 0.3;
  const std::vector<RetrievalCandidate> bad = {partial};
  CHECK_THROWS_AS(select_best(bad), SelectionError);
}

TEST_CASE("select_best on synthetic retrieval equals the oracle argmax") {
  CorpusSpec spec;
  spec.n_conversations = 3;
  spec.utterances_per_conversation = 15;
  const auto corpus = generate_corpus(spec);
  ReferenceNgramEmbedder emb;
  const auto db = corpus_database(corpus, emb);
  for (const auto& rec : db.records()) {
    const auto r = retrieve_multimodal(db, rec, {});
    if (r.completed.empty()) continue;
    std::vector<double> sw, tw;
    std::vector<std::uint64_t> idx;
    for (const auto& c : r.completed) {
      sw.push_back(*c.sw);
      tw.push_back(*c.tw);
      idx.push_back(c.id().index);
    }
    const auto ref = oracle::topsis(sw, tw, idx);
    CHECK(select_best(r.completed).record == r.completed[ref.best].record);
  }
}

TEST_CASE("preceding-n selection") {
  ReferenceNgramEmbedder emb;
  std::vector<testing_support::Utt> utts;
  for (std::uint64_t i = 0; i < 6; ++i) utts.push_back({"c", i, "u" + std::to_string(i), ""});
  const auto db = testing_support::make_db(utts, emb);

  const auto p1 = select_preceding_n(db, {"c", 4}, 1);
  REQUIRE(p1.size() == 1);
  CHECK(p1[0].id.index == 3);

  const auto p5 = select_preceding_n(db, {"c", 3}, 5);
  REQUIRE(p5.size() == 3);
  CHECK(p5[0].id.index == 0);
  CHECK(p5[2].id.index == 2);

  CHECK(select_preceding_n(db, {"c", 0}, 2).empty());
  CHECK_THROWS_AS(select_preceding_n(db, {"c", 2}, 0), ConfigError);
}
