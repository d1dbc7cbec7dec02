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
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ltrec/data_model.hpp"
#include "ltrec/training_config.hpp"

namespace ltrec {

struct ActionWeights {
  double click = 1.0;
  double cart = 2.0;
  double purchase = 3.0;

  double of(Action a) const {
    switch (a) {
      case Action::Click: return click;
      case Action::AddToCart: return cart;
      case Action::Purchase: return purchase;
    }
    return click;
  }
};

using SparseRow = std::vector<std::pair<std::size_t, double>>;  // sorted by index

/// Implicit-feedback user x item matrix. Items follow catalog order; users are
/// the train users in ascending id order. entry(u, i) is the max action weight
/// over that pair's interactions.
class InteractionMatrix {
 public:
  InteractionMatrix() = default;
  InteractionMatrix(const Dataset& train, const ActionWeights& weights);

  std::size_t n_users() const { return user_ids_.size(); }
  std::size_t n_items() const { return item_ids_.size(); }
  const std::vector<std::string>& user_ids() const { return user_ids_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  std::optional<std::size_t> user_index(const std::string& id) const;
  std::optional<std::size_t> item_index(const std::string& id) const;

  const SparseRow& user_row(std::size_t u) const { return rows_[u]; }
  const SparseRow& item_column(std::size_t i) const { return cols_[i]; }
  /// 0 when the pair never interacted.
  double entry(std::size_t u, std::size_t i) const;
  std::size_t nnz() const { return nnz_; }

 private:
  std::vector<std::string> user_ids_, item_ids_;
  std::unordered_map<std::string, std::size_t> user_index_, item_index_;
  std::vector<SparseRow> rows_, cols_;
  std::size_t nnz_ = 0;
};

InteractionMatrix build_matrix(const SplitDataset& split, const ActionWeights& weights = {});

/// Item-item cosine similarity over interaction columns, truncated to each
/// item's k most similar items (positive similarity only, self excluded).
class ItemKnnModel {
 public:
  ItemKnnModel() = default;
  ItemKnnModel(const InteractionMatrix& m, std::size_t k_neighbors);

  std::size_t k_neighbors() const { return k_; }
  /// neighbors(j): (item, sim) sorted by sim descending then item id.
  const SparseRow& neighbors(std::size_t j) const { return neighbors_[j]; }
  /// Full cosine between two item columns (1 for i == j with a nonzero column).
  static double similarity(const InteractionMatrix& m, std::size_t i, std::size_t j);

  /// sum over i' in N_k(item) of sim(i', item) * entry(u, i').
  double score(const InteractionMatrix& m, std::size_t user, std::size_t item) const;
  /// score() for every item, same accumulation order.
  std::vector<double> score_all(const InteractionMatrix& m, std::size_t user) const;

  void save(const InteractionMatrix& m, const std::filesystem::path& path) const;
  static ItemKnnModel load(const InteractionMatrix& m, const std::filesystem::path& path);

  bool operator==(const ItemKnnModel& o) const { return k_ == o.k_ && neighbors_ == o.neighbors_; }

 private:
  void build_inverse();

  std::size_t k_ = 0;
  std::vector<SparseRow> neighbors_;
  // inverse_[i'] = (j, sim) for every j with i' in N_k(j), ascending j.
  std::vector<SparseRow> inverse_;
};

/// Convenience form of ItemKnnModel::score keyed by ids. Unknown ids throw
/// DataError.
double itemknn_score(const std::string& user, const std::string& item,
                     const InteractionMatrix& matrix, const ItemKnnModel& model);

struct MFModel {
  std::size_t factors = 0;
  std::vector<double> user_factors;  // n_users x factors
  std::vector<double> item_factors;  // n_items x factors

  std::size_t n_users() const { return factors ? user_factors.size() / factors : 0; }
  std::size_t n_items() const { return factors ? item_factors.size() / factors : 0; }
  double predict(std::size_t u, std::size_t i) const;

  bool operator==(const MFModel&) const = default;
};

void save_mf(const MFModel& m, const std::filesystem::path& path);
MFModel load_mf(const std::filesystem::path& path);

struct BprConfig {
  TrainingConfig train{10, 256, 0.05, 42, 1};
  std::size_t factors = 32;
  double reg = 1e-4;
  double init_std = 0.1;
};

struct BprGradient {
  std::vector<double> user, pos, neg;
};

/// -ln sigmoid(x_ui - x_uj) + reg/2 (|p_u|^2 + |q_i|^2 + |q_j|^2). The
/// gradient is written (not accumulated) into `grad` when non-null.
double bpr_sample_loss(const MFModel& m, std::size_t u, std::size_t i, std::size_t j,
                       double reg, BprGradient* grad = nullptr);

struct BprSample {
  std::size_t user, pos, neg;
};

/// One sample per positive entry: uniform user, uniform positive of that
/// user, uniform negative outside the user's row.
std::vector<BprSample> sample_bpr_triples(const InteractionMatrix& m, std::size_t count,
                                          std::uint64_t seed);

MFModel init_mf(const InteractionMatrix& m, std::size_t factors, double init_std,
                std::uint64_t seed);

/// Mini-batch BPR: per-sample gradients are taken at the batch-start
/// parameters and summed. The report tracks the mean loss on a fixed sample
/// set drawn before training.
MFModel train_bpr(const InteractionMatrix& m, const BprConfig& config,
                  TrainingReport* report = nullptr);

enum class CfBackend { ItemKNN, BPR };

/// Dispatches collaborative scoring to whichever backend was trained.
class CfScorer {
 public:
  CfScorer() = default;
  CfScorer(std::shared_ptr<const InteractionMatrix> matrix, ItemKnnModel knn)
      : backend_(CfBackend::ItemKNN), matrix_(std::move(matrix)), knn_(std::move(knn)) {}
  CfScorer(std::shared_ptr<const InteractionMatrix> matrix, MFModel mf)
      : backend_(CfBackend::BPR), matrix_(std::move(matrix)), mf_(std::move(mf)) {}

  bool initialized() const { return matrix_ != nullptr; }
  CfBackend backend() const { return backend_; }

  double score(const std::string& user, const std::string& item) const;
  double score(std::size_t user, std::size_t item) const;
  std::vector<double> score_all(std::size_t user) const;

  const ItemKnnModel* knn() const { return knn_ ? &*knn_ : nullptr; }
  const MFModel* mf() const { return mf_ ? &*mf_ : nullptr; }
  const InteractionMatrix& matrix() const { require(); return *matrix_; }

 private:
  void require() const;

  CfBackend backend_ = CfBackend::ItemKNN;
  std::shared_ptr<const InteractionMatrix> matrix_;
  std::optional<ItemKnnModel> knn_;
  std::optional<MFModel> mf_;
};

}  // namespace ltrec
