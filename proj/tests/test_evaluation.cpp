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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ltrec/errors.hpp"
#include "ltrec/evaluation.hpp"
#include "support.hpp"

using namespace ltrec;
using namespace ltrec::testing;

namespace {

using List = std::vector<std::string>;

ItemSet as_items(const std::set<std::string>& s) { return ItemSet(s.begin(), s.end()); }

// Random list without repeats drawn from `ids`.
List random_list(Rng& rng, const List& ids, std::size_t len) {
  List shuffled = ids;
  rng.shuffle(shuffled);
  shuffled.resize(std::min(len, shuffled.size()));
  return shuffled;
}

Dataset flagged(const List& ids, const std::set<std::string>& tail) {
  std::vector<ItemRecord> items;
  for (const auto& id : ids) {
    ItemRecord it = make_item(id);
    it.tail_flag = tail.count(id) ? TailFlag::Tail : TailFlag::Head;
    items.push_back(it);
  }
  return Dataset(items, {});
}

struct Fixture {
  SplitDataset split;
  std::shared_ptr<const EmbeddingMatrix> emb;
  PipelineConfig config;

  Fixture() {
    const Dataset d = classify_head_tail(
        recompute_sales_from_purchases(
            generate_synthetic({.seed = 21, .n_users = 60, .n_items = 150, .n_interactions = 1500})),
        0.1);
    split = chronological_split(d, 0.2);
    emb = std::make_shared<const EmbeddingMatrix>(pseudo_embed_catalog(d.catalog(), 16, 21));
    config.intent_train.epochs = 2;
    config.bpr.train.epochs = 3;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

EvalConfig small_eval() {
  EvalConfig e;
  e.ks = {1, 10, 50};
  return e;
}

}  // namespace

TEST_CASE("metric examples") {
  const List top{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  CHECK(recall_at_k(top, ItemSet{"a", "c", "e"}, 10) == 1.0);
  CHECK(recall_at_k(top, ItemSet{"x"}, 10) == 0.0);
  CHECK(recall_at_k(top, ItemSet{"b", "x", "y", "z"}, 5) == 0.25);

  CHECK(hit_rate_at_k(top, ItemSet{"j", "q"}, 10) == 1.0);
  CHECK(hit_rate_at_k(top, ItemSet{"j"}, 9) == 0.0);

  CHECK(ndcg_at_k(top, ItemSet{"a"}, 10) == 1.0);
  CHECK(std::abs(ndcg_at_k(top, ItemSet{"c"}, 10) - 0.5) < 1e-12);
  CHECK(std::abs(ndcg_at_k(top, ItemSet{"a", "b"}, 10) - 1.0) < 1e-12);

  CHECK_THROWS_AS(recall_at_k(top, ItemSet{}, 10), DataError);
  CHECK_THROWS_AS(hit_rate_at_k(top, ItemSet{}, 10), DataError);
  CHECK_THROWS_AS(ndcg_at_k(top, ItemSet{}, 10), DataError);
}

TEST_CASE("diversity and tail coverage examples") {
  const List a{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  const List b{"a", "b", "c", "d", "e", "k", "l", "m", "n", "o"};
  const List c{"p", "q", "r", "s", "t", "u", "v", "w", "x", "y"};
  CHECK(diversity({a, a, a}, 100) == 0.0);
  CHECK(diversity({a, c}, 100) == 1.0);
  CHECK(std::abs(diversity({a, b}, 100) - 2.0 / 3.0) < 1e-4);
  CHECK_THROWS_AS(diversity({a}, 100), DataError);

  List ids;
  std::set<std::string> tail;
  for (int i = 0; i < 100; ++i) {
    ids.push_back("I" + std::to_string(i));
    if (i < 30) tail.insert(ids.back());
  }
  const Dataset cat = flagged(ids, tail);
  std::vector<List> lists(10);
  for (int i = 0; i < 100; ++i) lists[i % 10].push_back(ids[i]);
  CHECK(std::abs(tail_coverage(lists, cat) - 0.3) < 1e-12);
  CHECK(tail_coverage({{"I0", "I1"}}, cat) == 1.0);
  CHECK(tail_coverage({{"I50", "I51"}}, cat) == 0.0);
  // Repeated slots count once each; distinct mode counts items.
  CHECK(std::abs(tail_coverage({{"I0", "I50"}, {"I0", "I51"}}, cat) - 0.5) < 1e-12);
  CHECK(std::abs(tail_coverage({{"I0", "I50"}, {"I0", "I51"}}, cat, true) - 1.0 / 3.0) < 1e-12);

  const Dataset unflagged({make_item("A")}, {});
  CHECK_THROWS_AS(tail_coverage({{"A"}}, unflagged), DataError);
}

TEST_CASE("metrics agree with brute force on random instances") {
  Rng rng(100);
  for (int trial = 0; trial < 200; ++trial) {
    const List ids = numbered("I", 5 + rng.below(46));
    std::set<std::string> rel;
    while (rel.empty())
      for (const auto& id : ids)
        if (rng.uniform() < 0.2) rel.insert(id);
    const List list = random_list(rng, ids, 1 + rng.below(20));
    const std::size_t k = 1 + rng.below(25);
    CHECK(std::abs(recall_at_k(list, as_items(rel), k) - oracle_recall(list, rel, k)) < 1e-9);
    CHECK(std::abs(hit_rate_at_k(list, as_items(rel), k) - oracle_hit(list, rel, k)) < 1e-9);
    CHECK(std::abs(ndcg_at_k(list, as_items(rel), k) - oracle_ndcg(list, rel, k)) < 1e-9);

    std::vector<List> lists(2 + rng.below(6));
    for (auto& l : lists) l = random_list(rng, ids, 1 + rng.below(20));
    CHECK(std::abs(diversity(lists, 10000) - oracle_diversity(lists)) < 1e-9);

    std::set<std::string> tail;
    for (const auto& id : ids)
      if (rng.uniform() < 0.5) tail.insert(id);
    CHECK(std::abs(tail_coverage(lists, flagged(ids, tail)) - oracle_tail(lists, tail)) < 1e-9);
  }
}

TEST_CASE("metric properties") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const List ids = numbered("I", 30);
    std::set<std::string> rel{ids[rng.below(30)], ids[rng.below(30)]};
    const List list = random_list(rng, ids, 20);
    double prev_r = 0, prev_h = 0;
    for (std::size_t k = 1; k <= 25; ++k) {
      const double r = recall_at_k(list, as_items(rel), k), h = hit_rate_at_k(list, as_items(rel), k);
      const double n = ndcg_at_k(list, as_items(rel), k);
      CHECK(r >= prev_r);
      CHECK(h >= prev_h);
      CHECK(r <= 1.0);
      CHECK(n >= 0.0);
      CHECK(n <= 1.0 + 1e-12);
      prev_r = r;
      prev_h = h;
    }
    List ideal(rel.begin(), rel.end());
    for (const auto& x : list)
      if (!rel.count(x)) ideal.push_back(x);
    CHECK(std::abs(ndcg_at_k(ideal, as_items(rel), 10) - 1.0) < 1e-12);

    std::vector<List> lists(3 + rng.below(5));
    for (auto& l : lists) l = random_list(rng, ids, 10);
    const double d = diversity(lists, 10000);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    auto permuted = lists;
    rng.shuffle(permuted);
    for (auto& l : permuted) rng.shuffle(l);
    CHECK(std::abs(diversity(permuted, 10000) - d) < 1e-12);
  }
  // Sampled pairs are seeded.
  std::vector<List> many;
  for (int u = 0; u < 200; ++u) many.push_back(random_list(rng, numbered("I", 40), 10));
  CHECK(diversity(many, 500, 3) == diversity(many, 500, 3));
  CHECK(std::abs(diversity(many, 500, 3) - oracle_diversity(many)) < 0.05);
}

TEST_CASE("latency statistics") {
  const auto s = latency_stats({5, 1, 4, 2, 3});
  CHECK(s.median_ms == 3.0);
  CHECK(s.mean_ms == 3.0);
  CHECK(s.p95_ms == 5.0);
  std::vector<double> hundred;
  for (int i = 1; i <= 100; ++i) hundred.push_back(i);
  const auto h = latency_stats(hundred);
  CHECK(h.median_ms == 50.5);
  CHECK(h.p95_ms == 95.0);
  CHECK(latency_stats({}).samples_ms.empty());

  std::vector<std::string> calls;
  const auto m = measure_latency([&](const std::string& u) { calls.push_back(u); }, {"a", "b", "c"}, 4);
  CHECK(calls == std::vector<std::string>{"a", "b", "c", "a", "a", "b", "c"});
  CHECK(m.samples_ms.size() == 3);
  CHECK(m.median_ms >= 0.0);
}

TEST_CASE("relevant items exclude training history") {
  std::vector<InteractionRecord> train{{"u", "A", Action::Click, 1}};
  std::vector<InteractionRecord> test{{"u", "A", Action::Click, 2}, {"u", "B", Action::Click, 3},
                                      {"u", "C", Action::Purchase, 4}};
  auto cat = std::make_shared<const Catalog>(std::vector<ItemRecord>{make_item("A"), make_item("B"), make_item("C")});
  const SplitDataset s{Dataset(cat, train), Dataset(cat, test), 0.2};
  CHECK(relevant_items(s, "u", false) == ItemSet{"B", "C"});
  CHECK(relevant_items(s, "u", true) == ItemSet{"C"});
}

TEST_CASE("evaluate_recommender on a small pipeline") {
  const auto& f = fixture();
  auto comps = std::make_shared<const TrainedComponents>(train_components(f.split.train, f.emb, f.config));
  const Recommender rec(comps, f.config.weights, f.config.normalization, f.config.k_each);
  const auto r = evaluate_recommender(rec, f.split, small_eval());
  CHECK(r.users_evaluated > 0);
  double prev = 0.0;
  for (const auto& [k, v] : r.recall_at) {
    CHECK(v >= prev);
    CHECK(v <= 1.0);
    CHECK(r.hit_rate_at.at(k) >= v - 1e-12);
    prev = v;
  }
  CHECK(r.diversity >= 0.0);
  CHECK(r.diversity <= 1.0);
  CHECK(r.tail_coverage >= 0.0);
  CHECK(r.tail_coverage <= 1.0);
  CHECK(r.to_kv().find("recall@10") != std::string::npos);
  CHECK_FALSE(r.to_table().empty());

  const std::vector<FusionWeights> ws{{1, 0, 0}, {0.4, 0.4, 0.2}, {0, 0, 1}};
  const auto batch = evaluate_weightings(rec, f.split, ws, small_eval());
  REQUIRE(batch.size() == 3);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const Recommender single(comps, ws[i], f.config.normalization, f.config.k_each);
    CHECK(batch[i].to_kv() == evaluate_recommender(single, f.split, small_eval()).to_kv());
  }
}

TEST_CASE("run_experiment") {
  const auto& f = fixture();
  CHECK(run_experiment(f.split, f.emb, {}, small_eval()).empty());
  ExperimentConfig a{"fusion", f.config}, b{"fusion-again", f.config};
  const auto res = run_experiment(f.split, f.emb, {a, b}, small_eval());
  REQUIRE(res.size() == 2);
  CHECK(res[0].name == "fusion");
  CHECK(res[0].report.to_kv() == res[1].report.to_kv());
  const std::string table = comparison_table(res);
  CHECK(table.find("fusion-again") != std::string::npos);
  CHECK(table == comparison_table(run_experiment(f.split, f.emb, {a, b}, small_eval())));
}
