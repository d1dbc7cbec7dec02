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

#include "ltrec/fusion_ranker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "ltrec/errors.hpp"

namespace ltrec {

void FusionWeights::validate() const {
  for (double x : {semantic, collaborative, generative})
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("fusion weights must be finite and >= 0");
  if (semantic == 0.0 && collaborative == 0.0 && generative == 0.0)
    throw ConfigError("fusion weights must not all be zero");
}

namespace {

void normalize_one(std::span<ScoreTriple> t, double ScoreTriple::*ch, Normalization norm) {
  if (norm == Normalization::None || t.empty()) return;
  const double n = static_cast<double>(t.size());
  if (norm == Normalization::ZScore) {
    double mean = 0.0;
    for (const auto& x : t) mean += x.*ch;
    mean /= n;
    double var = 0.0;
    for (const auto& x : t) var += (x.*ch - mean) * (x.*ch - mean);
    const double sd = std::sqrt(var / n);
    for (auto& x : t) x.*ch = sd > 0.0 ? (x.*ch - mean) / sd : 0.0;
    return;
  }
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& x : t) {
    lo = std::min(lo, x.*ch);
    hi = std::max(hi, x.*ch);
  }
  for (auto& x : t) x.*ch = hi > lo ? (x.*ch - lo) / (hi - lo) : 0.5;
}

}  // namespace

void normalize_channels(std::span<ScoreTriple> triples, Normalization norm) {
  normalize_one(triples, &ScoreTriple::s_sem, norm);
  normalize_one(triples, &ScoreTriple::s_cf, norm);
  normalize_one(triples, &ScoreTriple::s_gen, norm);
}

std::vector<std::size_t> fuse_rank(std::span<const ScoreTriple> triples,
                                   std::span<const std::string* const> ids, const FusionWeights& weights,
                                   std::size_t k) {
  weights.validate();
  if (k < 1) throw ConfigError("k must be >= 1");
  std::vector<double> s(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) s[i] = fused_score(triples[i], weights);
  std::vector<std::size_t> order(triples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (s[a] != s[b]) return s[a] > s[b];
                      return *ids[a] < *ids[b];
                    });
  order.resize(take);
  return order;
}

RecommendationList fuse(const std::map<std::string, ScoreTriple>& triples, const FusionWeights& weights,
                        std::size_t k) {
  std::vector<ScoreTriple> t;
  std::vector<const std::string*> ids;
  for (const auto& [id, tr] : triples) {
    ids.push_back(&id);
    t.push_back(tr);
  }
  RecommendationList out;
  out.k = k;
  for (auto pos : fuse_rank(t, ids, weights, k)) out.items.push_back({*ids[pos], fused_score(t[pos], weights)});
  return out;
}

std::vector<FusionWeights> simplex_grid(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw ConfigError("grid step must lie in (0, 1]");
  const auto n = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9));
  std::vector<FusionWeights> out;
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; i + j <= n; ++j) {
      const double a = static_cast<double>(i) * step;
      const double b = static_cast<double>(j) * step;
      double c = 1.0 - a - b;
      if (c < -1e-9) continue;
      c = std::max(0.0, c);
      if (c < 1e-12) c = 0.0;
      out.push_back({a, b, c});
    }
  }
  return out;
}

std::size_t select_best_weights(std::span<const FusionWeights> points, std::span<const double> metric) {
  if (points.empty() || points.size() != metric.size()) throw ConfigError("weight selection over no points");
  auto dist = [](const FusionWeights& w) {
    const double a = w.semantic - 0.4, b = w.collaborative - 0.4, c = w.generative - 0.2;
    return a * a + b * b + c * c;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto& p = points[i];
    const auto& q = points[best];
    if (metric[i] != metric[best]) {
      if (metric[i] > metric[best]) best = i;
      continue;
    }
    const double dp = dist(p), dq = dist(q);
    if (dp != dq) {
      if (dp < dq) best = i;
      continue;
    }
    if (std::tie(p.semantic, p.collaborative, p.generative) <
        std::tie(q.semantic, q.collaborative, q.generative))
      best = i;
  }
  return best;
}

}  // namespace ltrec
