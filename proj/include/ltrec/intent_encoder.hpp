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

// Additive attention over a user's history embeddings with a learnable
// recency term:
//
//   logit_t = u . tanh(W e_t + b) + beta * t      t = 1 (oldest) .. T (newest)
//   alpha   = softmax(logit)
//   h       = sum_t alpha_t e_t
//
// The recency term is isolated in recency_term() so a per-position variant is
// a local change.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ltrec/data_model.hpp"
#include "ltrec/embedding_store.hpp"
#include "ltrec/training_config.hpp"

namespace ltrec {

inline constexpr std::size_t kDefaultHistoryLength = 50;

struct AttentionParams {
  std::size_t dim = 0;
  std::vector<double> W;  // dim x dim, row-major
  Vector b;
  Vector u;
  double beta = 0.0;

  /// W = 0.1 I, b = 0, u ~ U[-0.1, 0.1], beta = 0.
  static AttentionParams initial(std::size_t dim, std::uint64_t seed);
  static AttentionParams zeros(std::size_t dim);

  double& w(std::size_t r, std::size_t c) { return W[r * dim + c]; }
  double w(std::size_t r, std::size_t c) const { return W[r * dim + c]; }

  /// Throws DataError on shape mismatch or non-finite entries.
  void validate() const;

  bool operator==(const AttentionParams&) const = default;
};

void save_attention_params(const AttentionParams& p, const std::filesystem::path& path);
AttentionParams load_attention_params(const std::filesystem::path& path);

struct UserHistory {
  std::string user_id;
  std::vector<std::string> items;  // oldest first
};

struct IntentVector {
  std::string user_id;
  Vector h;
  Vector alphas;
};

/// The user's interactions in `d`, keeping the most recent `max_length`.
UserHistory make_history(const Dataset& d, const std::string& user_id,
                         std::size_t max_length = kDefaultHistoryLength);

inline double recency_term(double beta, std::size_t position) {
  return beta * static_cast<double>(position);
}

Vector attention_logits(const UserHistory& history, const AttentionParams& params,
                        const EmbeddingMatrix& embeddings);
IntentVector intent(const UserHistory& history, const AttentionParams& params,
                    const EmbeddingMatrix& embeddings);

// Row-index forms used on hot paths; `rows` are embedding row indices.
Vector attention_logits_rows(std::span<const std::size_t> rows, const AttentionParams& params,
                             const EmbeddingMatrix& embeddings);
IntentVector intent_rows(std::span<const std::size_t> rows, const AttentionParams& params,
                         const EmbeddingMatrix& embeddings);

/// Softmax with the max subtracted before exponentiation.
Vector stable_softmax(std::span<const double> logits);

/// One next-item training example: a history prefix, the item that followed
/// it, and a sampled negative.
struct IntentTriple {
  std::vector<std::size_t> history;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

/// Same shape as AttentionParams; holds dL/dparam.
using AttentionGradient = AttentionParams;

/// -ln sigmoid(cos(h, e_pos) - cos(h, e_neg)). When `grad` is non-null the
/// analytic gradient is accumulated into it (scaled by `scale`).
double intent_triple_loss(const IntentTriple& triple, const AttentionParams& params,
                          const EmbeddingMatrix& embeddings, AttentionGradient* grad = nullptr,
                          double scale = 1.0);

/// Every (prefix, next item) pair of train users with >= 2 interactions, each
/// with `negatives_per_positive` negatives drawn uniformly from items outside
/// the user's history. Deterministic for a fixed seed.
std::vector<IntentTriple> make_intent_triples(const Dataset& train,
                                              const EmbeddingMatrix& embeddings,
                                              std::size_t max_length,
                                              const TrainingConfig& config);

/// Mini-batch SGD on the sampled pairwise ranking objective over a fixed
/// triple set. Throws DataError when no triple can be formed.
AttentionParams train_intent(const SplitDataset& split, const EmbeddingMatrix& embeddings,
                             const TrainingConfig& config,
                             std::size_t max_length = kDefaultHistoryLength,
                             TrainingReport* report = nullptr);

AttentionParams train_intent_on_triples(const std::vector<IntentTriple>& triples,
                                        const EmbeddingMatrix& embeddings,
                                        const TrainingConfig& config,
                                        TrainingReport* report = nullptr);

}  // namespace ltrec
