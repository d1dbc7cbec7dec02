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
#include "support.hpp"

using namespace ltrec;
using namespace ltrec::testing;

namespace {

using Order = std::vector<std::size_t>;

MarkovModel abac_model() {
  MarkovModel m(std::vector<std::string>{"A", "B", "C"}, 1, 0.1);
  const std::vector<std::size_t> ab{0, 1}, ac{0, 2};
  m.observe_sequence(ab);
  m.observe_sequence(ab);
  m.observe_sequence(ac);
  return m;
}

// Context A, candidates B and C, label prefers the less probable C.
CandidateRanking inverted_pair(const MarkovModel& m) {
  CandidateRanking r;
  r.input_user = "u";
  r.context = {"A"};
  r.candidates = {{"B", m.log_prob({0}, 1), 0.1}, {"C", m.log_prob({0}, 2), 0.9}};
  r.label_order = {1, 0};
  return r;
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST_CASE("label order examples") {
  const std::vector<std::string> ids{"y1", "y2", "y3"};
  CHECK(label_order_from(std::vector<double>{0.1, 0.3, 0.2}, std::vector<double>{-1, -2, -3}, ids) == Order{1, 2, 0});
  CHECK(label_order_from(std::vector<double>{0, 0, 0}, std::vector<double>{-3, -1, -2}, ids) == Order{1, 2, 0});
  CHECK(label_order_from(std::vector<double>{0, 0, 0}, std::vector<double>{-1, -1, -1}, ids) == Order{0, 1, 2});
  CHECK(label_order_from(std::vector<double>{0.5}, std::vector<double>{-1}, std::vector<std::string>{"y1"}) ==
        Order{0});
}

TEST_CASE("feedback table and partial order") {
  std::vector<InteractionRecord> xs{{"u1", "A", Action::Click, 1}, {"u1", "A", Action::Purchase, 2},
                                    {"u2", "A", Action::Click, 1}, {"u2", "B", Action::Click, 2},
                                    {"u3", "C", Action::Click, 1}, {"u4", "B", Action::Purchase, 1}};
  const Dataset held({make_item("A"), make_item("B"), make_item("C"), make_item("D")}, xs);
  const FeedbackTable fb(held);
  CHECK(fb.click_rate("A") == 0.5);
  CHECK(fb.conversion_rate("A") == 0.5);
  CHECK(fb.click_rate("B") == 0.5);
  CHECK(fb.conversion_rate("B") == 0.5);
  CHECK(fb.click_rate("C") == 0.25);
  CHECK(fb.conversion_rate("C") == 0.0);
  CHECK(fb.click_rate("D") == 0.0);

  BeamCandidateSet cands{"u9", {{"C", -0.5}, {"D", -1.0}, {"A", -2.0}, {"B", -3.0}}, 4};
  const CandidateRanking r = build_partial_order(cands, held, 1.0, 1.0);
  // A and B tie on feedback (1.0); A has the higher log prob.
  CHECK(r.label_order == Order{2, 3, 0, 1});
  CHECK(r.candidates[0].feedback == 0.25);
  CHECK_THROWS_AS(build_partial_order(cands, held, 0.0, 0.0), ConfigError);
  CHECK_THROWS_AS(build_partial_order(BeamCandidateSet{}, held), DataError);
}

TEST_CASE("ListMLE examples and properties") {
  CHECK(listmle_loss(std::vector<double>{3.7}, Order{0}).loss == 0.0);
  CHECK(std::abs(listmle_loss(std::vector<double>{0.4, 0.4}, Order{0, 1}).loss - std::log(2.0)) < 1e-12);
  CHECK_THROWS_AS(listmle_loss(std::vector<double>{1.0, NAN}, Order{0, 1}), DataError);
  CHECK_THROWS_AS(listmle_loss(std::vector<double>{1.0, 2.0}, Order{0, 0}), DataError);

  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(7);
    auto s = random_vector(rng, k, 3.0);
    const auto o = random_permutation(rng, k);
    const double base = listmle_loss(s, o).loss;
    CHECK(base > 0.0);
    const double c = 50.0 * rng.normal();
    for (auto& x : s) x += c;
    CHECK(std::abs(listmle_loss(s, o).loss - base) < 1e-9);
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(ranking_gradient_error(seed, RankingLoss::ListMLE) < 1e-5);
}

TEST_CASE("RankNet examples and properties") {
  CHECK(std::abs(ranknet_loss(std::vector<double>{1, 1, 1}, Order{2, 0, 1}).loss - std::log(2.0)) < 1e-12);
  CHECK(ranknet_loss(std::vector<double>{60, 40, 20}, Order{0, 1, 2}).loss < 1e-8);
  CHECK_THROWS_AS(ranknet_loss(std::vector<double>{1}, Order{0}), ConfigError);

  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(7);
    auto s = random_vector(rng, k);
    const auto o = random_permutation(rng, k);
    // Widen the gap of the top-labelled item over the others.
    const double before = ranknet_loss(s, o).loss;
    s[o[0]] += 0.5 + rng.uniform();
    CHECK(ranknet_loss(s, o).loss < before);
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(ranking_gradient_error(seed, RankingLoss::RankNet) < 1e-5);
}

TEST_CASE("violation counting") {
  CHECK(count_violations(std::vector<double>{3, 2, 1}, Order{0, 1, 2}) == 0);
  CHECK(count_violations(std::vector<double>{3, 2, 1}, Order{2, 1, 0}) == 3);
  CHECK(count_violations(std::vector<double>{1, 1}, Order{1, 0}) == 0);
  const auto rep = listmle_loss(std::vector<double>{1, 2, 3}, Order{0, 1, 2});
  CHECK(rep.pairwise_violations == 3);
}

TEST_CASE("alignment: zero epochs is a no-op") {
  const MarkovModel m = abac_model();
  AlignConfig c;
  c.train.epochs = 0;
  AlignReport rep;
  CHECK(align_generative(m, {inverted_pair(m)}, c, &rep) == m);
  CHECK(rep.violations_before == 1);
  CHECK(rep.violations_after == 1);
}

TEST_CASE("alignment fixes an inverted pair") {
  for (RankingLoss loss : {RankingLoss::ListMLE, RankingLoss::RankNet}) {
    const MarkovModel m = abac_model();
    AlignConfig c;
    c.loss = loss;
    c.train.epochs = 200;
    AlignReport rep;
    const MarkovModel a = align_generative(m, {inverted_pair(m)}, c, &rep);
    CHECK(rep.violations_before == 1);
    CHECK(rep.violations_after == 0);
    CHECK(a.probability({0}, 2) > a.probability({0}, 1));
    CHECK(std::abs(sum(a.distribution({0})) - 1.0) < 1e-9);
  }
}

TEST_CASE("alignment keeps an already consistent order") {
  const MarkovModel m = abac_model();
  CandidateRanking r = inverted_pair(m);
  r.label_order = {0, 1};
  AlignConfig c;
  c.train.epochs = 20;
  const MarkovModel a = align_generative(m, {r}, c);
  CHECK(a.probability({0}, 1) > a.probability({0}, 2));
}

TEST_CASE("alignment reduces violations on synthetic rankings") {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const MarkovModel m = random_markov(rng, 15, 2, 60);
    const auto rankings = inverted_rankings(rng, m, 40, 5);
    const std::size_t before = total_violations(m, rankings);
    REQUIRE(before > 0);
    AlignConfig c;
    c.train.epochs = 10;
    AlignReport rep;
    const MarkovModel a = align_generative(m, rankings, c, &rep);
    CHECK(rep.violations_before == before);
    CHECK(rep.violations_after == total_violations(a, rankings));
    CHECK(rep.violations_after < before);
    REQUIRE(rep.epoch_loss.size() == 10);
    CHECK(rep.epoch_loss[0] <= rep.initial_loss);
    CHECK(rep.epoch_loss[1] <= rep.epoch_loss[0]);
    CHECK(rep.epoch_loss[2] <= rep.epoch_loss[1]);
    for (const auto& [ctx, adj] : a.adjustments()) CHECK(std::abs(sum(a.distribution(ctx)) - 1.0) < 1e-9);
  }
}

TEST_CASE("alignment errors") {
  const MarkovModel m = abac_model();
  AlignConfig c;
  CHECK_THROWS_AS(align_generative(m, {}, c), DataError);
  CandidateRanking single = inverted_pair(m);
  single.candidates.resize(1);
  single.label_order = {0};
  c.loss = RankingLoss::RankNet;
  CHECK_THROWS_AS(align_generative(m, {single}, c), ConfigError);
  CandidateRanking unknown = inverted_pair(m);
  unknown.candidates[0].item_id = "Q";
  c.loss = RankingLoss::ListMLE;
  CHECK_THROWS_AS(align_generative(m, {unknown}, c), DataError);
}

TEST_CASE("rankings save/load round trip") {
  TempDir tmp;
  Rng rng(4);
  const MarkovModel m = random_markov(rng, 10, 2, 20);
  const auto rs = inverted_rankings(rng, m, 8, 4);
  save_rankings(rs, tmp.path() / "r.jsonl");
  const auto back = load_rankings(tmp.path() / "r.jsonl");
  REQUIRE(back.size() == rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    CHECK(back[i].input_user == rs[i].input_user);
    CHECK(back[i].context == rs[i].context);
    REQUIRE(back[i].candidates.size() == rs[i].candidates.size());
    // The file lists items in label order; compare the ranked sequences.
    for (std::size_t r = 0; r < rs[i].label_order.size(); ++r) {
      const auto& a = back[i].candidates[back[i].label_order[r]];
      const auto& b = rs[i].candidates[rs[i].label_order[r]];
      CHECK(a.item_id == b.item_id);
      CHECK(a.log_prob == b.log_prob);
      CHECK(a.feedback == b.feedback);
    }
  }
}
