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

// End-to-end hybrid recommender: trains the three score sources on a train
// split and serves fused top-k lists.
//
//   recall:  top-k_each by cos(h_u, e_j)  U  top-k_each by CF  U  beam(k_each)
//   score:   (cos(h_u, e_j), CF(u, j), ln P_gen(j | history)), normalized
//   fuse:    lambda . triple, top-k
//
// Items in the user's training history never leave recall.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ltrec/alignment.hpp"
#include "ltrec/cf_scorer.hpp"
#include "ltrec/data_model.hpp"
#include "ltrec/embedding_store.hpp"
#include "ltrec/fusion_ranker.hpp"
#include "ltrec/generative_scorer.hpp"
#include "ltrec/intent_encoder.hpp"

namespace ltrec {

struct PipelineConfig {
  std::size_t history_length = kDefaultHistoryLength;
  TrainingConfig intent_train{};  // 10 epochs, batch 256, lr 1e-4

  CfBackend cf_backend = CfBackend::BPR;
  std::size_t k_neighbors = 100;
  BprConfig bpr{};
  ActionWeights action_weights{};

  int markov_order = 2;
  double markov_alpha = 0.1;
  std::size_t filter_min_length = 2;
  std::optional<Action> filter_action;

  bool align = true;
  AlignConfig align_config{};
  std::size_t beam_width = kDefaultBeamWidth;
  double ctr_weight = 1.0;
  double cvr_weight = 1.0;
  double validation_fraction = 0.1;

  FusionWeights weights = kDefaultFusionWeights;
  Normalization normalization = Normalization::ZScore;
  std::size_t k_each = 100;

  void validate() const;
  /// Canonical text of every field that affects trained state (not the fusion
  /// settings). Equal keys give identical components.
  std::string component_key() const;
};

struct StageReports {
  TrainingReport intent;
  TrainingReport cf;
  AlignReport align;
  std::size_t rankings = 0;
};

struct TrainedComponents {
  std::shared_ptr<const Dataset> train;
  std::shared_ptr<const EmbeddingMatrix> embeddings;
  AttentionParams attention;
  std::shared_ptr<const InteractionMatrix> matrix;
  CfScorer cf;
  MarkovModel markov;          // as fitted
  MarkovModel aligned_markov;  // after alignment (== markov when disabled)
};

/// Validation slice for tuning and feedback simulation: the last
/// `fraction` of each user's train interactions.
SplitDataset validation_split(const Dataset& train, double fraction);

/// Offline-feedback rankings: for each user of `inner.train` who also appears
/// in `inner.test`, beam candidates from `model` labelled by the held-out
/// click/conversion rates of `inner.test`.
std::vector<CandidateRanking> make_alignment_rankings(const MarkovModel& model, const SplitDataset& inner,
                                                      const PipelineConfig& config);

/// Trains intent, CF and the sequence model on `train`, then aligns the
/// sequence model against rankings built from a validation slice of `train`.
TrainedComponents train_components(const Dataset& train, std::shared_ptr<const EmbeddingMatrix> embeddings,
                                   const PipelineConfig& config, StageReports* reports = nullptr);

/// Per-user state computed once per request.
struct UserState {
  std::string user_id;
  std::size_t matrix_user = 0;
  std::vector<std::size_t> history;   // full train sequence, catalog indices
  std::vector<bool> excluded;         // training-history mask over the catalog
  IntentVector intent;
  std::vector<double> cf_scores;      // every catalog item
  std::vector<double> gen_log_probs;  // every catalog item
};

struct CandidateScores {
  std::vector<std::size_t> items;  // catalog indices, ascending
  std::vector<ScoreTriple> raw;
  std::vector<ScoreTriple> normalized;
};

class Recommender {
 public:
  Recommender(std::shared_ptr<const TrainedComponents> components, FusionWeights weights,
              Normalization normalization, std::size_t k_each,
              std::size_t history_length = kDefaultHistoryLength);

  const TrainedComponents& components() const { return *c_; }
  const FusionWeights& weights() const { return weights_; }
  std::size_t k_each() const { return k_each_; }
  const Catalog& catalog() const { return c_->train->catalog(); }

  /// Throws ColdUserError for users without training history.
  UserState prepare(const std::string& user_id) const;

  // Per-source top-n lists (catalog indices), training history excluded.
  std::vector<std::size_t> semantic_top(const UserState& s, std::size_t n) const;
  std::vector<std::size_t> cf_top(const UserState& s, std::size_t n) const;
  std::vector<std::size_t> generative_top(const UserState& s, std::size_t n) const;

  /// Union of the three sources' top-k_each, ascending catalog indices.
  std::vector<std::size_t> recall_candidates(const UserState& s, std::size_t k_each) const;
  std::vector<std::string> recall_candidates(const std::string& user_id, std::size_t k_each) const;

  CandidateScores score_candidates(const UserState& s, const std::vector<std::size_t>& candidates,
                                   Normalization norm) const;
  std::map<std::string, ScoreTriple> score_candidates(const std::string& user_id,
                                                      const ItemSet& candidates, Normalization norm) const;

  /// Scored candidate set for a request of size k (recall depth max(k_each, k)).
  CandidateScores candidates_for(const UserState& s, std::size_t k) const;

  RecommendationList recommend(const std::string& user_id, std::size_t k) const;
  RecommendationList rank(const UserState& s, const CandidateScores& c, const FusionWeights& w,
                          std::size_t k) const;

 private:
  std::shared_ptr<const TrainedComponents> c_;
  FusionWeights weights_;
  Normalization norm_;
  std::size_t k_each_;
  std::size_t history_length_;
};

enum class TuningMetric { NDCG10, Recall50 };

struct GridSearchResult {
  FusionWeights best;
  std::vector<FusionWeights> points;
  std::vector<double> metric;
};

/// Per-user inputs for weight tuning: scored candidates plus relevant items.
struct TuningCase {
  CandidateScores scores;
  std::vector<const std::string*> ids;
  std::unordered_set<std::size_t> relevant;
};

/// Exhaustive evaluation of `points` on precomputed cases.
GridSearchResult grid_search_cases(const std::vector<TuningCase>& cases,
                                   const std::vector<FusionWeights>& points, TuningMetric metric);

/// Trains components on the first 90% of each user's train sequence and picks
/// simplex weights maximizing the metric on the last 10%.
GridSearchResult grid_search(const SplitDataset& split, std::shared_ptr<const EmbeddingMatrix> embeddings,
                             double grid_step, TuningMetric metric, const PipelineConfig& config);

}  // namespace ltrec
