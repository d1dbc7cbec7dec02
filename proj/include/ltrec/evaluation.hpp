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

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltrec/pipeline.hpp"

namespace ltrec {

// Ranking metrics with binary relevance. Empty `relevant` raises DataError.
double recall_at_k(std::span<const std::string> recommended, const ItemSet& relevant, std::size_t k);
double hit_rate_at_k(std::span<const std::string> recommended, const ItemSet& relevant, std::size_t k);
/// DCG = sum_r rel(r) / log2(r + 1); IDCG over min(|relevant|, k) hits.
double ndcg_at_k(std::span<const std::string> recommended, const ItemSet& relevant, std::size_t k);

/// Mean Jaccard distance between the top-10 lists of user pairs. All pairs are
/// used when there are at most `sample_pairs`; otherwise `sample_pairs` random
/// pairs drawn with `seed`.
double diversity(const std::vector<std::vector<std::string>>& lists, std::size_t sample_pairs,
                 std::uint64_t seed = 42);

/// Share of recommended slots holding tail items. With `distinct`, share of
/// distinct recommended items that are tail items.
double tail_coverage(const std::vector<std::vector<std::string>>& lists, const Dataset& catalog,
                     bool distinct = false);

struct LatencyStats {
  double median_ms = 0.0;
  double p95_ms = 0.0;  // nearest rank
  double mean_ms = 0.0;
  std::vector<double> samples_ms;
};

LatencyStats latency_stats(std::vector<double> samples_ms);

/// Calls `fn` on users[i % n] for `warmup` untimed calls, then once per user
/// timed.
LatencyStats measure_latency(const std::function<void(const std::string&)>& fn,
                             const std::vector<std::string>& users, std::size_t warmup);

struct EvalConfig {
  std::vector<std::size_t> ks{10, 100, 1000};
  std::size_t diversity_pairs = 10000;
  std::size_t diversity_k = 10;
  std::size_t tail_k = 10;
  bool tail_distinct = false;
  bool purchase_only = false;
  std::uint64_t seed = 42;

  void validate() const;
};

struct MetricReport {
  std::map<std::size_t, double> recall_at;
  std::map<std::size_t, double> hit_rate_at;
  std::map<std::size_t, double> ndcg_at;
  double diversity = 0.0;
  double tail_coverage = 0.0;
  std::optional<LatencyStats> latency;
  std::size_t users_evaluated = 0;
  std::size_t users_skipped = 0;

  /// "key value" lines, values at 6 significant digits.
  std::string to_kv() const;
  /// Aligned two-column table.
  std::string to_table() const;
};

/// Relevant set for one user: test items (purchases only when asked) minus
/// the user's training items.
ItemSet relevant_items(const SplitDataset& split, const std::string& user_id, bool purchase_only);

/// Evaluates a fusion ranker on every test user that has training history.
/// Throws Error if any list contains a training-history item.
MetricReport evaluate_recommender(const Recommender& rec, const SplitDataset& split, const EvalConfig& config);

/// evaluate_recommender for several weightings of one recommender; each user's
/// candidate set is scored once.
std::vector<MetricReport> evaluate_weightings(const Recommender& rec, const SplitDataset& split,
                                              const std::vector<FusionWeights>& weights,
                                              const EvalConfig& config);

struct ExperimentConfig {
  std::string name;
  PipelineConfig pipeline;
};

struct ExperimentResult {
  std::string name;
  MetricReport report;
};

/// Trains each configuration on split.train and evaluates on split.test.
/// Configurations with equal component keys share trained components.
std::vector<ExperimentResult> run_experiment(const SplitDataset& split,
                                             std::shared_ptr<const EmbeddingMatrix> embeddings,
                                             const std::vector<ExperimentConfig>& configs,
                                             const EvalConfig& eval);

/// Rows: metrics; columns: configurations.
std::string comparison_table(const std::vector<ExperimentResult>& results);

}  // namespace ltrec
