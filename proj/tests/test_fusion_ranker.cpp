// Copyright 2026 The ltrec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABILITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Fusion primitives plus the serving pipeline built on them.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ltrec/errors.hpp"
#include "ltrec/fusion_ranker.hpp"
#include "ltrec/pipeline.hpp"
#include "support.hpp"

using namespace ltrec;
using namespace ltrec::testing;

namespace {

std::vector<std::string> order_of(const RecommendationList& l) {
  std::vector<std::string> out;
  for (const auto& x : l.items) out.push_back(x.item_id);
  return out;
}

std::map<std::string, ScoreTriple> random_triples(Rng& rng, std::size_t n) {
  std::map<std::string, ScoreTriple> t;
  for (const auto& id : numbered("I", n)) t[id] = {rng.normal(), rng.normal(), rng.normal()};
  return t;
}

// Small trained pipeline shared by the pipeline tests.
struct Fixture {
  SplitDataset split;
  std::shared_ptr<const EmbeddingMatrix> emb;
  std::shared_ptr<const TrainedComponents> comps;
  PipelineConfig config;

  Fixture() {
    const Dataset d = classify_head_tail(
        recompute_sales_from_purchases(
            generate_synthetic({.seed = 11, .n_users = 80, .n_items = 120, .n_interactions = 2000})),
        0.1);
    split = chronological_split(d, 0.2);
    emb = std::make_shared<const EmbeddingMatrix>(pseudo_embed_catalog(d.catalog(), 16, 11));
    config.intent_train.epochs = 2;
    config.bpr.train.epochs = 3;
    config.k_each = 10;
    comps = std::make_shared<const TrainedComponents>(train_components(split.train, emb, config));
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("normalization examples") {
  std::vector<ScoreTriple> one{{0.7, 3.0, -2.0}};
  normalize_channels(one, Normalization::ZScore);
  CHECK(one[0] == ScoreTriple{0, 0, 0});

  std::vector<ScoreTriple> two{{0.2, 5, 1}, {0.8, 5, 2}};
  normalize_channels(two, Normalization::MinMax);
  CHECK(two[0].s_sem == 0.0);
  CHECK(two[1].s_sem == 1.0);
  CHECK(two[0].s_cf == 0.5);
  CHECK(two[1].s_cf == 0.5);

  std::vector<ScoreTriple> raw{{1, 2, 3}, {4, 5, 6}};
  auto same = raw;
  normalize_channels(same, Normalization::None);
  CHECK(same == raw);

  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ScoreTriple> t(2 + rng.below(30));
    for (auto& x : t) x = {rng.normal(), 10 * rng.normal(), rng.uniform() - 5};
    normalize_channels(t, Normalization::ZScore);
    for (auto ch : {&ScoreTriple::s_sem, &ScoreTriple::s_cf, &ScoreTriple::s_gen}) {
      double m = 0, v = 0;
      for (const auto& x : t) m += x.*ch;
      m /= static_cast<double>(t.size());
      for (const auto& x : t) v += (x.*ch - m) * (x.*ch - m);
      v /= static_cast<double>(t.size());
      CHECK(std::abs(m) < 1e-9);
      CHECK(std::abs(std::sqrt(v) - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("fuse examples") {
  CHECK(std::abs(fused_score({0.5, 0.25, -1.0}, {0.4, 0.4, 0.2}) - 0.1) < 1e-12);

  Rng rng(4);
  const auto t = random_triples(rng, 25);
  const auto sem = fuse(t, {1, 0, 0}, 25);
  for (std::size_t i = 1; i < sem.items.size(); ++i)
    CHECK(t.at(sem.items[i - 1].item_id).s_sem >= t.at(sem.items[i].item_id).s_sem);
  CHECK(fuse(t, {0.4, 0.4, 0.2}, 100).items.size() == 25);
  CHECK_THROWS_AS(fuse(t, {0, 0, 0}, 5), ConfigError);
  CHECK_THROWS_AS(fuse(t, {0.4, 0.4, 0.2}, 0), ConfigError);

  std::map<std::string, ScoreTriple> ties{{"C", {1, 0, 0}}, {"A", {1, 0, 0}}, {"B", {1, 0, 0}}};
  CHECK(order_of(fuse(ties, {1, 1, 1}, 3)) == std::vector<std::string>{"A", "B", "C"});
}

TEST_CASE("fused ranking is invariant under positive weight scaling") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto t = random_triples(rng, 2 + rng.below(30));
    const FusionWeights w{rng.uniform(), rng.uniform(), rng.uniform() + 0.01};
    const double c = std::exp(4.0 * rng.normal());
    const FusionWeights cw{c * w.semantic, c * w.collaborative, c * w.generative};
    CHECK(order_of(fuse(t, w, t.size())) == order_of(fuse(t, cw, t.size())));
  }
}

TEST_CASE("simplex grid") {
  CHECK(simplex_grid(0.1).size() == 66);
  CHECK(simplex_grid(1.0).size() == 3);
  const auto half = simplex_grid(0.5);
  REQUIRE(half.size() == 6);
  std::set<std::tuple<double, double, double>> want{{0, 0, 1}, {0, 0.5, 0.5}, {0, 1, 0},
                                                    {0.5, 0, 0.5}, {0.5, 0.5, 0}, {1, 0, 0}};
  std::set<std::tuple<double, double, double>> got;
  for (const auto& w : half) got.insert({w.semantic, w.collaborative, w.generative});
  CHECK(got == want);
  for (const auto& w : simplex_grid(0.1)) {
    CHECK(std::abs(w.semantic + w.collaborative + w.generative - 1.0) < 1e-9);
    CHECK(w.generative >= 0.0);
  }
  CHECK_THROWS_AS(simplex_grid(0.0), ConfigError);
  CHECK_THROWS_AS(simplex_grid(1.5), ConfigError);
}

TEST_CASE("best weight selection and tie-breaks") {
  const std::vector<FusionWeights> pts{{1, 0, 0}, {0.4, 0.4, 0.2}, {0, 1, 0}};
  CHECK(select_best_weights(pts, std::vector<double>{0.1, 0.2, 0.3}) == 2);
  CHECK(select_best_weights(pts, std::vector<double>{0.5, 0.5, 0.5}) == 1);
  // Equal distance to the default: lexicographically smallest wins.
  const std::vector<FusionWeights> sym{{0.5, 0.3, 0.2}, {0.3, 0.5, 0.2}};
  CHECK(select_best_weights(sym, std::vector<double>{1, 1}) == 1);
  const std::vector<FusionWeights> single{{0.2, 0.3, 0.5}};
  CHECK(select_best_weights(single, std::vector<double>{0.0}) == 0);
}

TEST_CASE("grid search on cases where only the semantic channel carries signal") {
  Rng rng(6);
  std::vector<TuningCase> cases;
  std::vector<std::string> ids = numbered("I", 200);
  for (int u = 0; u < 60; ++u) {
    TuningCase tc;
    for (std::size_t j = 0; j < 200; ++j) {
      const bool rel = rng.uniform() < 0.1;
      if (rel) tc.relevant.insert(j);
      tc.scores.items.push_back(j);
      tc.scores.raw.push_back({(rel ? 1.0 : 0.0) + 0.5 * rng.normal(), rng.normal(), rng.normal()});
      tc.ids.push_back(&ids[j]);
    }
    if (tc.relevant.empty()) continue;
    tc.scores.normalized = tc.scores.raw;
    normalize_channels(tc.scores.normalized, Normalization::ZScore);
    cases.push_back(std::move(tc));
  }
  for (TuningMetric m : {TuningMetric::Recall50, TuningMetric::NDCG10}) {
    const auto r = grid_search_cases(cases, simplex_grid(0.1), m);
    CHECK(r.best.semantic >= r.best.collaborative);
    CHECK(r.best.semantic >= r.best.generative);
    CHECK(std::abs(r.best.semantic + r.best.collaborative + r.best.generative - 1.0) < 1e-9);
    // The reported best is the argmax of the reported metric.
    CHECK(r.metric[select_best_weights(r.points, r.metric)] == *std::max_element(r.metric.begin(), r.metric.end()));
  }
  const std::vector<FusionWeights> one{{0.2, 0.2, 0.6}};
  CHECK(grid_search_cases(cases, one, TuningMetric::Recall50).best == one[0]);
  CHECK_THROWS_AS(grid_search_cases({}, one, TuningMetric::Recall50), DataError);
}

TEST_CASE("validation split carves the tail of train") {
  const auto& f = fixture();
  const SplitDataset inner = validation_split(f.split.train, 0.1);
  for (const auto& u : f.split.train.users()) {
    const std::size_t n = f.split.train.sequence(u).size();
    CHECK(inner.test.sequence(u).size() == holdout_count(n, 0.1));
  }
}

TEST_CASE("recall candidates equal the per-source brute force") {
  const auto& f = fixture();
  const Recommender rec(f.comps, f.config.weights, f.config.normalization, f.config.k_each);
  const Catalog& cat = rec.catalog();
  std::size_t checked = 0;
  for (const auto& uid : f.split.train.users()) {
    const UserState s = rec.prepare(uid);
    for (std::size_t k : {1, 5, 10}) {
      std::set<std::string> hist;
      for (auto j : s.history) hist.insert(cat[j].item_id);

      std::set<std::string> want;
      for (const auto& [id, _] : oracle_top_k(s.intent.h, *f.emb, k, hist)) want.insert(id);

      std::vector<std::pair<double, std::string>> cf;
      for (std::size_t j = 0; j < cat.size(); ++j)
        if (!hist.count(cat[j].item_id))
          cf.emplace_back(f.comps->cf.score(s.matrix_user, j), cat[j].item_id);
      std::sort(cf.begin(), cf.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      for (std::size_t i = 0; i < k && i < cf.size(); ++i) want.insert(cf[i].second);

      const ItemSet ex(hist.begin(), hist.end());
      UserHistory h{uid, {}};
      for (auto j : s.history) h.items.push_back(cat[j].item_id);
      for (const auto& c : beam_search(f.comps->aligned_markov, h, k, ex).candidates) want.insert(c.item_id);

      const auto got = rec.recall_candidates(uid, k);
      CHECK(std::set<std::string>(got.begin(), got.end()) == want);
      CHECK(got.size() >= std::min(k, cat.size() - hist.size()));
      CHECK(got.size() <= 3 * k);
      for (const auto& id : got) CHECK_FALSE(hist.count(id));
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("single-channel weights reproduce each source ranking") {
  const auto& f = fixture();
  const Recommender rec(f.comps, f.config.weights, Normalization::ZScore, f.config.k_each);
  for (const auto& uid : f.split.train.users()) {
    const UserState s = rec.prepare(uid);
    const CandidateScores c = rec.candidates_for(s, 10);
    const FusionWeights corners[] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int ch = 0; ch < 3; ++ch) {
      const auto list = rec.rank(s, c, corners[ch], c.items.size());
      std::vector<std::pair<double, std::string>> want;
      for (std::size_t i = 0; i < c.items.size(); ++i) {
        const auto& r = c.raw[i];
        want.emplace_back(ch == 0 ? r.s_sem : ch == 1 ? r.s_cf : r.s_gen, rec.catalog()[c.items[i]].item_id);
      }
      // Ranking by raw scores; z-scoring is monotone, so only exact raw ties
      // could reorder, and both sides break those by id.
      std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      REQUIRE(list.items.size() == want.size());
      for (std::size_t i = 0; i < want.size(); ++i) CHECK(list.items[i].item_id == want[i].second);
    }
  }
}

TEST_CASE("recommend: size, history exclusion, cold users") {
  const auto& f = fixture();
  const Recommender rec(f.comps, f.config.weights, f.config.normalization, f.config.k_each);
  const std::string uid = f.split.train.users().front();
  std::set<std::string> hist;
  for (const auto& r : f.split.train.sequence(uid)) hist.insert(r.item_id);
  const auto top = rec.recommend(uid, 10);
  CHECK(top.items.size() == 10);
  for (const auto& x : top.items) CHECK_FALSE(hist.count(x.item_id));
  for (std::size_t i = 1; i < top.items.size(); ++i) CHECK(top.items[i - 1].score >= top.items[i].score);

  const auto full = rec.recommend(uid, 100000);
  CHECK(full.items.size() == rec.catalog().size() - hist.size());
  CHECK_THROWS_AS(rec.recommend("nobody", 10), ColdUserError);
  CHECK_THROWS_AS(rec.recommend(uid, 0), ConfigError);

  const auto triples = rec.score_candidates(uid, ItemSet{top.items[0].item_id}, Normalization::ZScore);
  CHECK(triples.begin()->second == ScoreTriple{0, 0, 0});
  CHECK_THROWS_AS(rec.score_candidates(uid, ItemSet{"missing"}, Normalization::ZScore), DataError);
}

TEST_CASE("component training is deterministic") {
  const auto& f = fixture();
  const TrainedComponents again = train_components(f.split.train, f.emb, f.config);
  CHECK(again.attention == f.comps->attention);
  CHECK(*again.cf.mf() == *f.comps->cf.mf());
  CHECK(again.aligned_markov == f.comps->aligned_markov);
  const auto a = grid_search(f.split, f.emb, 0.5, TuningMetric::Recall50, f.config);
  const auto b = grid_search(f.split, f.emb, 0.5, TuningMetric::Recall50, f.config);
  CHECK(a.points.size() == 6);
  CHECK(a.best == b.best);
  CHECK(a.metric == b.metric);
}
