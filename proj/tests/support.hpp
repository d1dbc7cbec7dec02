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

#pragma once

// Helpers shared by the unit tests and the acceptance binary. The oracles here
// are written independently of the library code they check: plain loops, no
// shared helpers from src/.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ltrec/alignment.hpp"
#include "ltrec/cf_scorer.hpp"
#include "ltrec/data_model.hpp"
#include "ltrec/embedding_store.hpp"
#include "ltrec/generative_scorer.hpp"
#include "ltrec/intent_encoder.hpp"
#include "ltrec/rng.hpp"

namespace ltrec::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "ltrec_test_XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
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

inline ItemRecord make_item(const std::string& id, std::int64_t sales = 0) {
  ItemRecord r;
  r.item_id = id;
  r.title = "title " + id;
  r.sales_volume = sales;
  r.tokens = {"tok_" + id};
  return r;
}

/// Dataset from per-user item sequences (all clicks, timestamps 1, 2, ...).
inline Dataset make_dataset(const std::vector<std::string>& item_ids,
                            const std::vector<std::pair<std::string, std::vector<std::string>>>& seqs) {
  std::vector<ItemRecord> items;
  for (const auto& id : item_ids) items.push_back(make_item(id));
  std::vector<InteractionRecord> xs;
  for (const auto& [user, seq] : seqs) {
    std::int64_t t = 1;
    for (const auto& i : seq) xs.push_back({user, i, Action::Click, t++});
  }
  return Dataset(std::move(items), std::move(xs));
}

inline std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s = std::to_string(i);
    out.push_back(prefix + std::string(4 - std::min<std::size_t>(4, s.size()), '0') + s);
  }
  return out;
}

/// Random Gaussian rows (normalized by EmbeddingMatrix).
inline EmbeddingMatrix random_matrix(Rng& rng, const std::vector<std::string>& ids, std::size_t dim) {
  std::vector<ItemEmbedding> rows;
  for (const auto& id : ids) {
    Vector v(dim);
    for (auto& x : v) x = rng.normal();
    rows.push_back({id, v, false});
  }
  return EmbeddingMatrix(std::move(rows));
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

inline std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  rng.shuffle(p);
  return p;
}

// ---------------------------------------------------------------------------
// Finite differences

/// Relative error between two gradient vectors in the Euclidean norm:
/// |a - b| / max(|a|, |b|). Zero when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nb));
  if (denom == 0.0) return std::sqrt(diff);
  return std::sqrt(diff) / denom;
}

/// Central differences of f over every entry of x.
inline std::vector<double> central_diff(std::vector<double> x, const std::function<double(const std::vector<double>&)>& f,
                                        double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f(x);
    x[i] = keep - h;
    const double fm = f(x);
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Flat view of attention parameters: W, b, u, beta.
inline std::vector<double> flatten(const AttentionParams& p) {
  std::vector<double> v(p.W);
  v.insert(v.end(), p.b.begin(), p.b.end());
  v.insert(v.end(), p.u.begin(), p.u.end());
  v.push_back(p.beta);
  return v;
}

inline AttentionParams unflatten(const std::vector<double>& v, std::size_t d) {
  AttentionParams p = AttentionParams::zeros(d);
  std::size_t o = 0;
  for (std::size_t i = 0; i < d * d; ++i) p.W[i] = v[o++];
  for (std::size_t i = 0; i < d; ++i) p.b[i] = v[o++];
  for (std::size_t i = 0; i < d; ++i) p.u[i] = v[o++];
  p.beta = v[o];
  return p;
}

/// Random intent-loss instance (d <= 8, T <= 5). Returns the relative error
/// between the analytic and the central-difference gradient.
inline double intent_gradient_error(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d = 2 + rng.below(7);
  const std::size_t n = 8;
  const auto ids = numbered("I", n);
  const EmbeddingMatrix m = random_matrix(rng, ids, d);
  IntentTriple t;
  const std::size_t T = 1 + rng.below(5);
  for (std::size_t i = 0; i < T; ++i) t.history.push_back(rng.below(n));
  t.positive = rng.below(n);
  do t.negative = rng.below(n); while (t.negative == t.positive);

  AttentionParams p = AttentionParams::zeros(d);
  for (auto& x : p.W) x = 0.5 * rng.normal();
  for (auto& x : p.b) x = 0.5 * rng.normal();
  for (auto& x : p.u) x = rng.normal();
  p.beta = 0.5 * rng.normal();

  AttentionGradient g = AttentionParams::zeros(d);
  intent_triple_loss(t, p, m, &g);
  const auto fd = central_diff(flatten(p), [&](const std::vector<double>& x) {
    return intent_triple_loss(t, unflatten(x, d), m);
  }, 1e-5);
  return relative_error(flatten(g), fd);
}

/// Random BPR instance (|U|, |I| <= 10, f <= 4).
inline double bpr_gradient_error(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t nu = 1 + rng.below(10), ni = 2 + rng.below(9), f = 1 + rng.below(4);
  MFModel m;
  m.factors = f;
  m.user_factors = random_vector(rng, nu * f);
  m.item_factors = random_vector(rng, ni * f);
  const std::size_t u = rng.below(nu), i = rng.below(ni);
  std::size_t j;
  do j = rng.below(ni); while (j == i);
  const double reg = 0.01 * (1 + rng.below(10));

  BprGradient g;
  bpr_sample_loss(m, u, i, j, reg, &g);
  std::vector<double> analytic(g.user);
  analytic.insert(analytic.end(), g.pos.begin(), g.pos.end());
  analytic.insert(analytic.end(), g.neg.begin(), g.neg.end());

  std::vector<double> x;
  for (std::size_t k = 0; k < f; ++k) x.push_back(m.user_factors[u * f + k]);
  for (std::size_t k = 0; k < f; ++k) x.push_back(m.item_factors[i * f + k]);
  for (std::size_t k = 0; k < f; ++k) x.push_back(m.item_factors[j * f + k]);
  const auto fd = central_diff(x, [&](const std::vector<double>& v) {
    MFModel c = m;
    for (std::size_t k = 0; k < f; ++k) {
      c.user_factors[u * f + k] = v[k];
      c.item_factors[i * f + k] = v[f + k];
      c.item_factors[j * f + k] = v[2 * f + k];
    }
    return bpr_sample_loss(c, u, i, j, reg);
  }, 1e-5);
  return relative_error(analytic, fd);
}

/// Random ranking-loss instance (k <= 8), central differences with step 1e-6.
inline double ranking_gradient_error(std::uint64_t seed, RankingLoss kind) {
  Rng rng(seed);
  const std::size_t k = 2 + rng.below(7);
  const auto s = random_vector(rng, k, 2.0);
  const auto order = random_permutation(rng, k);
  auto loss = [&](const std::vector<double>& x) {
    return kind == RankingLoss::ListMLE ? listmle_loss(x, order).loss : ranknet_loss(x, order).loss;
  };
  const auto rep = kind == RankingLoss::ListMLE ? listmle_loss(s, order) : ranknet_loss(s, order);
  return relative_error(rep.gradient, central_diff(s, loss, 1e-6));
}

// ---------------------------------------------------------------------------
// Brute-force metric oracles

inline std::set<std::string> prefix_set(const std::vector<std::string>& list, std::size_t k) {
  std::set<std::string> s;
  for (std::size_t r = 0; r < list.size() && r < k; ++r) s.insert(list[r]);
  return s;
}

inline double oracle_recall(const std::vector<std::string>& list, const std::set<std::string>& rel, std::size_t k) {
  std::size_t hits = 0;
  for (const auto& x : prefix_set(list, k))
    if (rel.count(x)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(rel.size());
}

inline double oracle_hit(const std::vector<std::string>& list, const std::set<std::string>& rel, std::size_t k) {
  for (const auto& x : prefix_set(list, k))
    if (rel.count(x)) return 1.0;
  return 0.0;
}

inline double oracle_ndcg(const std::vector<std::string>& list, const std::set<std::string>& rel, std::size_t k) {
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t r = 1; r <= k && r <= list.size(); ++r)
    if (rel.count(list[r - 1])) dcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  for (std::size_t r = 1; r <= std::min(k, rel.size()); ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  return dcg / idcg;
}

inline double oracle_diversity(const std::vector<std::vector<std::string>>& lists) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < lists.size(); ++a)
    for (std::size_t b = a + 1; b < lists.size(); ++b) {
      const auto sa = prefix_set(lists[a], 10), sb = prefix_set(lists[b], 10);
      std::set<std::string> uni(sa);
      uni.insert(sb.begin(), sb.end());
      std::size_t inter = 0;
      for (const auto& x : sa) inter += sb.count(x);
      total += uni.empty() ? 0.0 : 1.0 - static_cast<double>(inter) / static_cast<double>(uni.size());
      ++pairs;
    }
  return total / static_cast<double>(pairs);
}

inline double oracle_tail(const std::vector<std::vector<std::string>>& lists, const std::set<std::string>& tail) {
  double slots = 0.0, hits = 0.0;
  for (const auto& l : lists)
    for (const auto& x : l) {
      slots += 1.0;
      if (tail.count(x)) hits += 1.0;
    }
  return hits / slots;
}

// ---------------------------------------------------------------------------
// Retrieval and beam oracles

/// Exhaustive cosine scan with the documented ordering.
inline std::vector<std::pair<std::string, double>> oracle_top_k(const std::vector<double>& q, const EmbeddingMatrix& m,
                                                                std::size_t k, const std::set<std::string>& exclude) {
  std::vector<std::pair<std::string, double>> all;
  double qn = 0.0;
  for (double x : q) qn += x * x;
  qn = std::sqrt(qn);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (exclude.count(m.id(i))) continue;
    double dp = 0.0, rn = 0.0;
    for (std::size_t c = 0; c < q.size(); ++c) {
      dp += q[c] * m.row(i)[c];
      rn += m.row(i)[c] * m.row(i)[c];
    }
    all.emplace_back(m.id(i), dp / (qn * std::sqrt(rn)));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

/// Every allowed sequence of `depth` items scored by summed log probability;
/// first items of the best sequences, deduplicated, in beam order.
inline std::vector<std::pair<std::string, double>> oracle_beam(const MarkovModel& model,
                                                               const std::vector<std::size_t>& history,
                                                               const std::set<std::size_t>& exclude,
                                                               std::size_t depth) {
  struct Seq {
    std::vector<std::size_t> items;
    double score;
  };
  std::vector<Seq> all{{{}, 0.0}};
  for (std::size_t step = 0; step < depth; ++step) {
    std::vector<Seq> next;
    for (const auto& s : all) {
      std::vector<std::size_t> ctx(history);
      ctx.insert(ctx.end(), s.items.begin(), s.items.end());
      const auto p = model.distribution(model.context_of(ctx));
      for (std::size_t j = 0; j < model.vocab_size(); ++j) {
        if (exclude.count(j)) continue;
        Seq n{s.items, s.score + std::log(p[j])};
        n.items.push_back(j);
        next.push_back(n);
      }
    }
    all = std::move(next);
  }
  const auto& ids = model.vocab();
  std::sort(all.begin(), all.end(), [&](const Seq& a, const Seq& b) {
    if (a.score != b.score) return a.score > b.score;
    for (std::size_t i = 0; i < a.items.size(); ++i)
      if (a.items[i] != b.items[i]) return ids[a.items[i]] < ids[b.items[i]];
    return false;
  });
  std::vector<std::pair<std::string, double>> out;
  std::set<std::size_t> seen;
  for (const auto& s : all)
    if (seen.insert(s.items.front()).second) out.emplace_back(ids[s.items.front()], s.score);
  return out;
}

/// Markov model over n items fitted on random sequences.
inline MarkovModel random_markov(Rng& rng, std::size_t n, int order, std::size_t n_seqs) {
  MarkovModel m(numbered("V", n), order, 0.05 + rng.uniform());
  for (std::size_t s = 0; s < n_seqs; ++s) {
    std::vector<std::size_t> seq(2 + rng.below(6));
    for (auto& x : seq) x = rng.below(n);
    m.observe_sequence(seq);
  }
  return m;
}

/// Beam candidates for random contexts of `model`, labelled by generation
/// order with random adjacent swaps, so each ranking carries inversions.
inline std::vector<CandidateRanking> inverted_rankings(Rng& rng, const MarkovModel& model, std::size_t n,
                                                       std::size_t width) {
  std::vector<CandidateRanking> out;
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<std::size_t> hist(1 + rng.below(static_cast<std::uint64_t>(model.order())));
    for (auto& x : hist) x = rng.below(model.vocab_size());
    const auto beams = beam_search_rows(model, hist, width, std::vector<bool>(model.vocab_size(), false));
    CandidateRanking cr;
    cr.input_user = "u" + std::to_string(r);
    for (auto h : hist) cr.context.push_back(model.vocab()[h]);
    for (const auto& [j, lp] : beams) cr.candidates.push_back({model.vocab()[j], lp, 0.0});
    for (std::size_t i = 0; i < beams.size(); ++i) cr.label_order.push_back(i);
    for (std::size_t i = 0; i + 1 < beams.size(); ++i)
      if (rng.uniform() < 0.5) std::swap(cr.label_order[i], cr.label_order[i + 1]);
    if (beams.size() >= 2) std::swap(cr.label_order[0], cr.label_order[1]);
    out.push_back(std::move(cr));
  }
  return out;
}

/// Total pairwise violations of `rankings` under `model`.
inline std::size_t total_violations(const MarkovModel& model, const std::vector<CandidateRanking>& rankings) {
  std::size_t v = 0;
  for (const auto& r : rankings) {
    const auto s = generation_scores(model, r);
    for (std::size_t a = 0; a < r.label_order.size(); ++a)
      for (std::size_t b = a + 1; b < r.label_order.size(); ++b)
        if (s[r.label_order[a]] < s[r.label_order[b]]) ++v;
  }
  return v;
}

}  // namespace ltrec::testing
