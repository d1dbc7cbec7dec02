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

// Next-item sequence model standing in for a fine-tuned language model. Any
// replacement only needs to provide the next-item distribution for a history;
// beam search, alignment and fusion are written against that.
//
// Interpolated add-alpha smoothing with backoff, down to a uniform base:
//
//   P_0(j)          = 1 / V
//   P_1(j)          = (c(j) + a P_0(j)) / (N + a)
//   P_n(j | ctx_n)  = (c(ctx_n, j) + a P_{n-1}(j | ctx_{n-1})) / (c(ctx_n) + a)
//
// where ctx_{n-1} drops the oldest item of ctx_n. An unseen context reduces to
// its backoff. Alignment multiplies P(. | ctx) by exp(theta_ctx) per item and
// renormalizes, so every conditional keeps summing to one.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltrec/data_model.hpp"
#include "ltrec/embedding_store.hpp"
#include "ltrec/intent_encoder.hpp"

namespace ltrec {

using Context = std::vector<std::size_t>;  // oldest first, vocabulary indices

class MarkovModel {
 public:
  MarkovModel() = default;
  /// Vocabulary is `vocab` in the given order (the catalog order in practice).
  MarkovModel(std::vector<std::string> vocab, int order, double smoothing_alpha);

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  const std::vector<std::string>& vocab() const { return vocab_; }
  std::optional<std::size_t> index(const std::string& item_id) const;

  void observe_sequence(std::span<const std::size_t> seq);

  /// Last min(order, |history|) items of `history`.
  Context context_of(std::span<const std::size_t> history) const;
  Context context_of(const UserHistory& history) const;

  /// Smoothed (and alignment-adjusted) next-item distribution.
  std::vector<double> distribution(const Context& ctx) const;
  /// Same as distribution() without alignment adjustments.
  std::vector<double> base_distribution(const Context& ctx) const;
  double probability(const Context& ctx, std::size_t item) const;
  double log_prob(const Context& ctx, std::size_t item) const;

  // Alignment log-weights. Keyed by the exact context used for lookup.
  double adjustment(const Context& ctx, std::size_t item) const;
  void add_adjustment(const Context& ctx, std::size_t item, double delta);
  const std::map<Context, std::map<std::size_t, double>>& adjustments() const { return adjust_; }
  std::size_t adjusted_contexts() const { return adjust_.size(); }

  void save(const std::filesystem::path& path) const;
  /// `vocab` must match the vocabulary the model was saved with.
  static MarkovModel load(const std::filesystem::path& path, std::vector<std::string> vocab);

  bool operator==(const MarkovModel& o) const {
    return order_ == o.order_ && alpha_ == o.alpha_ && vocab_ == o.vocab_ &&
           unigram_ == o.unigram_ && total_ == o.total_ && counts_ == o.counts_ &&
           adjust_ == o.adjust_;
  }

 private:
  struct Node {
    double total = 0.0;
    std::map<std::size_t, double> next;
    bool operator==(const Node&) const = default;
  };

  double base_probability(const Context& ctx, std::size_t item) const;
  double normalizer(const Context& ctx) const;

  int order_ = 2;
  double alpha_ = 0.1;
  std::vector<std::string> vocab_;
  std::map<std::string, std::size_t> index_;
  std::vector<double> unigram_;
  double total_ = 0.0;
  std::map<Context, Node> counts_;
  std::map<Context, std::map<std::size_t, double>> adjust_;
};

/// Keeps users whose sequence has >= min_length events and, when
/// `required_action` is set, at least one event of that action.
Dataset filter_training_sequences(const Dataset& d, std::size_t min_length,
                                  std::optional<Action> required_action = std::nullopt);

/// Counts every per-user sequence of `train`. Vocabulary = train's catalog.
MarkovModel fit_markov(const Dataset& train, int order = 2, double smoothing_alpha = 0.1);

/// ln P(item | last `order` items of history). Throws DataError for unknown
/// items.
double gen_log_prob(const MarkovModel& model, const UserHistory& history, const std::string& item);

struct BeamCandidate {
  std::string item_id;
  double log_prob = 0.0;
  bool operator==(const BeamCandidate&) const = default;
};

struct BeamCandidateSet {
  std::string input_user;
  std::vector<BeamCandidate> candidates;  // descending log_prob, unique items
  std::size_t width = 5;
};

inline constexpr std::size_t kDefaultBeamWidth = 5;

/// depth == 1: the `width` most probable next items outside `exclude`, ties by
/// ascending item id. depth > 1: beam search over sequences of that length,
/// each step restricted to items outside `exclude`; returns the first items of
/// the surviving beams, deduplicated, each scored by its best beam's summed
/// log probability.
BeamCandidateSet beam_search(const MarkovModel& model, const UserHistory& history,
                             std::size_t width, const ItemSet& exclude, std::size_t depth = 1);

/// Index form of beam_search: `excluded[i]` skips vocabulary item i.
std::vector<std::pair<std::size_t, double>> beam_search_rows(
    const MarkovModel& model, std::span<const std::size_t> history, std::size_t width,
    const std::vector<bool>& excluded, std::size_t depth = 1);

}  // namespace ltrec
