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

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ltrec/data_model.hpp"
#include "ltrec/generative_scorer.hpp"
#include "ltrec/training_config.hpp"

namespace ltrec {

struct RankedCandidate {
  std::string item_id;
  double log_prob = 0.0;
  double feedback = 0.0;
  bool operator==(const RankedCandidate&) const = default;
};

/// Beam candidates for one user with offline feedback. label_order lists
/// candidate indices best first and is always a total order.
struct CandidateRanking {
  std::string input_user;
  /// The history items the candidates were generated from (sequence model
  /// context, oldest first).
  std::vector<std::string> context;
  std::vector<RankedCandidate> candidates;
  std::vector<std::size_t> label_order;
  bool operator==(const CandidateRanking&) const = default;
};

struct RankingLossReport {
  double loss = 0.0;
  std::vector<double> gradient;  // d loss / d score, per candidate
  std::size_t pairwise_violations = 0;
};

/// Item-level click-through and conversion rates measured on a held-out log:
///   ctr(y) = users who interacted with y / users in the log
///   cvr(y) = users who purchased y / users who interacted with y
class FeedbackTable {
 public:
  explicit FeedbackTable(const Dataset& heldout);
  double click_rate(const std::string& item) const;
  double conversion_rate(const std::string& item) const;

 private:
  std::unordered_map<std::string, std::pair<double, double>> rates_;
};

/// feedback = ctr_weight * ctr + cvr_weight * cvr; label order sorts feedback
/// descending, then generation log_prob descending, then item id ascending.
CandidateRanking build_partial_order(const BeamCandidateSet& candidates,
                                     const std::vector<std::string>& context,
                                     const FeedbackTable& feedback, double ctr_weight,
                                     double cvr_weight);
CandidateRanking build_partial_order(const BeamCandidateSet& candidates, const Dataset& heldout,
                                     double ctr_weight = 1.0, double cvr_weight = 1.0);

/// Ordering rule used by build_partial_order, exposed for raw feedback vectors.
std::vector<std::size_t> label_order_from(std::span<const double> feedback,
                                          std::span<const double> log_probs,
                                          std::span<const std::string> ids);

/// Pairs (better, worse) under `label_order` whose scores are strictly
/// inverted.
std::size_t count_violations(std::span<const double> scores, std::span<const std::size_t> label_order);

/// Plackett-Luce negative log-likelihood of the label permutation.
RankingLossReport listmle_loss(std::span<const double> scores, std::span<const std::size_t> label_order);

/// Mean over label-ordered pairs of -ln sigmoid(s_better - s_worse). k >= 2.
RankingLossReport ranknet_loss(std::span<const double> scores, std::span<const std::size_t> label_order);

enum class RankingLoss { ListMLE, RankNet };

struct AlignConfig {
  TrainingConfig train{10, 256, 0.1, 42, 1};
  RankingLoss loss = RankingLoss::ListMLE;
};

struct AlignReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;
  std::size_t violations_before = 0;
  std::size_t violations_after = 0;
  std::size_t pairs = 0;
  int selected_epoch = 0;  // 0 = the unaligned model
};

/// Current log-probabilities of a ranking's candidates under `model`.
std::vector<double> generation_scores(const MarkovModel& model, const CandidateRanking& r);

/// Gradient descent on the ranking loss over per-(context, candidate)
/// log-weights of the sequence model. Each step sums per-ranking gradients
/// over a batch taken at the batch-start weights. Returns the epoch snapshot
/// with the fewest pairwise violations (latest on ties), so the violation
/// count never rises above the input model's.
MarkovModel align_generative(const MarkovModel& model, const std::vector<CandidateRanking>& rankings,
                             const AlignConfig& config, AlignReport* report = nullptr);

/// JSON lines: user_id, context, items (label order, best first), feedback,
/// log_probs.
void save_rankings(const std::vector<CandidateRanking>& rankings, const std::filesystem::path& path);
std::vector<CandidateRanking> load_rankings(const std::filesystem::path& path);

}  // namespace ltrec
