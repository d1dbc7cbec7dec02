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
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ltrec/data_model.hpp"

namespace ltrec {

using Vector = std::vector<double>;
using ItemSet = std::unordered_set<std::string>;

inline constexpr std::size_t kMinEmbeddingDim = 2;
inline constexpr std::size_t kMaxEmbeddingDim = 4096;

enum class Pooling { Average, First };

/// Token-level vectors for one item, as produced by an external text encoder.
struct TokenEmbeddingSequence {
  std::string item_id;
  std::vector<Vector> vectors;
};

struct ItemEmbedding {
  std::string item_id;
  Vector vector;
  bool normalized = false;
};

struct ScoredItem {
  std::string item_id;
  double score = 0.0;

  bool operator==(const ScoredItem&) const = default;
};

/// Dense row-major item embeddings. When built for a catalog, row i holds the
/// catalog's i-th item, so catalog indices and row indices coincide.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  /// Rows are L2-normalized on construction. Throws DataError on empty input,
  /// duplicate ids, inconsistent dimensions or non-finite entries.
  explicit EmbeddingMatrix(std::vector<ItemEmbedding> rows);

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return ids_.size(); }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::optional<std::size_t> find(const std::string& item_id) const;

  bool operator==(const EmbeddingMatrix& o) const {
    return dim_ == o.dim_ && ids_ == o.ids_ && data_ == o.data_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Average: elementwise mean. First: copy of the first token vector (the
/// stand-in for CLS pooling). The result is not normalized.
ItemEmbedding pool(const TokenEmbeddingSequence& tokens, Pooling mode);

/// Reads an embedding file and reorders rows to catalog order. Every catalog
/// item must appear exactly once.
EmbeddingMatrix ingest_embeddings(const std::filesystem::path& path, const Catalog& catalog);
void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);

/// Deterministic unit vector for one token under `seed`.
Vector token_vector(const std::string& token, std::size_t dim, std::uint64_t seed);

/// Hash-based stand-in for the external text encoder: pooled token vectors,
/// L2-normalized.
ItemEmbedding pseudo_embed(const ItemRecord& item, std::size_t dim, std::uint64_t seed,
                           Pooling mode = Pooling::Average);

/// pseudo_embed over a whole catalog, rows in catalog order.
EmbeddingMatrix pseudo_embed_catalog(const Catalog& catalog, std::size_t dim, std::uint64_t seed,
                                     Pooling mode = Pooling::Average);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

/// Clamped to [-1, 1]. Throws ConfigError on size mismatch, DataError on a
/// zero vector.
double cosine(std::span<const double> a, std::span<const double> b);

/// Exhaustive scan: the k rows with highest cosine to `query`, descending,
/// ties by ascending item_id, skipping `exclude`.
std::vector<ScoredItem> top_k_semantic(std::span<const double> query,
                                       const EmbeddingMatrix& matrix, std::size_t k,
                                       const ItemSet& exclude);

/// Same scan keyed by row index; `excluded[i]` true skips row i.
std::vector<std::pair<std::size_t, double>> top_k_semantic_rows(
    std::span<const double> query, const EmbeddingMatrix& matrix, std::size_t k,
    const std::vector<bool>& excluded);

}  // namespace ltrec
