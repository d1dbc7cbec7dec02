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

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ltrec/embedding_store.hpp"

namespace ltrec {

struct ScoreTriple {
  double s_sem = 0.0;
  double s_cf = 0.0;
  double s_gen = 0.0;
  bool operator==(const ScoreTriple&) const = default;
};

/// Linear fusion weights for the semantic, collaborative and generative
/// channels. Not constrained to the simplex at serving time.
struct FusionWeights {
  double semantic = 0.4;
  double collaborative = 0.4;
  double generative = 0.2;

  void validate() const;
  bool operator==(const FusionWeights&) const = default;
};

inline constexpr FusionWeights kDefaultFusionWeights{0.4, 0.4, 0.2};

enum class Normalization { ZScore, MinMax, None };

struct RecommendationList {
  std::string user_id;
  std::vector<ScoredItem> items;  // fused score descending
  std::size_t k = 0;
};

/// Normalizes each channel across the candidate set in place.
///   ZScore: (x - mean) / std (population std); std == 0 gives all zeros.
///   MinMax: (x - min) / (max - min); a constant channel gives all 0.5.
void normalize_channels(std::span<ScoreTriple> triples, Normalization norm);

inline double fused_score(const ScoreTriple& t, const FusionWeights& w) {
  return w.semantic * t.s_sem + w.collaborative * t.s_cf + w.generative * t.s_gen;
}

/// Top-k by fused score, ties by ascending item id.
RecommendationList fuse(const std::map<std::string, ScoreTriple>& triples, const FusionWeights& weights,
                        std::size_t k);

/// Index form: returns positions into `triples` (fused score descending, ties
/// by `ids[pos]` ascending).
std::vector<std::size_t> fuse_rank(std::span<const ScoreTriple> triples,
                                   std::span<const std::string* const> ids, const FusionWeights& weights,
                                   std::size_t k);

/// Points (a, b, 1 - a - b) with a, b multiples of `step` and 1 - a - b >= 0.
/// step = 0.1 gives 66 points, 0.5 gives 6, 1 gives the 3 corners.
std::vector<FusionWeights> simplex_grid(double step);

/// Index of the best point: highest metric, then closest (Euclidean) to the
/// default 0.4/0.4/0.2, then lexicographically smallest weights.
std::size_t select_best_weights(std::span<const FusionWeights> points, std::span<const double> metric);

}  // namespace ltrec
