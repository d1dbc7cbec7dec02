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

#include "ltrec/embedding_store.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ltrec/errors.hpp"
#include "ltrec/io.hpp"
#include "ltrec/rng.hpp"

namespace ltrec {

using json = nlohmann::ordered_json;

namespace {

void check_dim(std::size_t d) {
  if (d < kMinEmbeddingDim || d > kMaxEmbeddingDim)
    throw ConfigError("embedding dimension " + std::to_string(d) + " outside [" +
                      std::to_string(kMinEmbeddingDim) + ", " +
                      std::to_string(kMaxEmbeddingDim) + "]");
}

void normalize(Vector& v) {
  const double n = norm(v);
  if (!(n > 0.0)) throw DataError("cannot normalize a zero vector");
  for (double& x : v) x /= n;
}

// Score descending, then id ascending.
template <class Key>
bool ranks_before(double sa, const Key& a, double sb, const Key& b) {
  if (sa != sb) return sa > sb;
  return a < b;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<ItemEmbedding> rows) {
  if (rows.empty()) throw DataError("embedding matrix needs at least one row");
  dim_ = rows.front().vector.size();
  check_dim(dim_);
  ids_.reserve(rows.size());
  data_.reserve(rows.size() * dim_);
  for (auto& r : rows) {
    if (r.vector.size() != dim_)
      throw DataError("embedding for " + r.item_id + " has dimension " +
                      std::to_string(r.vector.size()) + ", expected " + std::to_string(dim_));
    for (std::size_t k = 0; k < dim_; ++k)
      if (!std::isfinite(r.vector[k]))
        throw DataError("non-finite embedding value for " + r.item_id + " at position " +
                        std::to_string(k));
    if (!index_.emplace(r.item_id, ids_.size()).second)
      throw DataError("duplicate embedding for item " + r.item_id);
    normalize(r.vector);
    ids_.push_back(std::move(r.item_id));
    data_.insert(data_.end(), r.vector.begin(), r.vector.end());
  }
}

std::optional<std::size_t> EmbeddingMatrix::find(const std::string& item_id) const {
  auto it = index_.find(item_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ItemEmbedding pool(const TokenEmbeddingSequence& tokens, Pooling mode) {
  if (tokens.vectors.empty())
    throw DataError("cannot pool an empty token sequence for " + tokens.item_id);
  const std::size_t d = tokens.vectors.front().size();
  for (const auto& v : tokens.vectors)
    if (v.size() != d)
      throw DataError("token vectors of mixed dimension for " + tokens.item_id);

  ItemEmbedding out{tokens.item_id, {}, false};
  if (mode == Pooling::First) {
    out.vector = tokens.vectors.front();
    return out;
  }
  out.vector.assign(d, 0.0);
  for (const auto& v : tokens.vectors)
    for (std::size_t k = 0; k < d; ++k) out.vector[k] += v[k];
  const double n = static_cast<double>(tokens.vectors.size());
  for (double& x : out.vector) x /= n;
  return out;
}

EmbeddingMatrix ingest_embeddings(const std::filesystem::path& path, const Catalog& catalog) {
  const auto lines = io::read_lines(path);
  std::size_t n = 0;
  while (n < lines.size() && lines[n].empty()) ++n;
  if (n == lines.size()) throw DataError(path.string() + ": empty embedding file");

  std::size_t dim = 0;
  try {
    dim = json::parse(lines[n]).at("dim").get<std::size_t>();
  } catch (const json::exception&) {
    throw DataError(path.string() + ":" + std::to_string(n + 1) + ": expected header {\"dim\": d}");
  }
  check_dim(dim);

  std::vector<std::optional<Vector>> by_item(catalog.size());
  for (++n; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    std::string id;
    Vector v;
    try {
      const json j = json::parse(lines[n]);
      id = j.at("item_id").get<std::string>();
      for (const auto& x : j.at("vector")) {
        // nlohmann maps NaN/Inf to null on output; treat null as non-finite.
        v.push_back(x.is_null() ? std::nan("") : x.get<double>());
      }
    } catch (const json::exception& e) {
      throw DataError(where + ": malformed embedding record (" + e.what() + ")");
    }
    if (v.size() != dim)
      throw DataError(where + ": item " + id + " has dimension " + std::to_string(v.size()) +
                      ", header declares " + std::to_string(dim));
    for (std::size_t k = 0; k < v.size(); ++k)
      if (!std::isfinite(v[k]))
        throw DataError(where + ": non-finite value for item " + id + " at position " +
                        std::to_string(k));
    const auto pos = catalog.find(id);
    if (!pos) throw DataError(where + ": embedding for unknown item " + id);
    if (by_item[*pos]) throw DataError(where + ": duplicate embedding for item " + id);
    by_item[*pos] = std::move(v);
  }

  std::vector<ItemEmbedding> rows;
  rows.reserve(catalog.size());
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    if (!by_item[i]) throw DataError(path.string() + ": missing embedding for item " + catalog[i].item_id);
    rows.push_back({catalog[i].item_id, std::move(*by_item[i]), false});
  }
  return EmbeddingMatrix(std::move(rows));
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  std::string out = json{{"dim", m.dim()}}.dump() + "\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json j;
    j["item_id"] = m.id(i);
    const auto r = m.row(i);
    j["vector"] = Vector(r.begin(), r.end());
    out += j.dump();
    out += '\n';
  }
  io::write_file(path, out);
}

Vector token_vector(const std::string& token, std::size_t dim, std::uint64_t seed) {
  Rng rng(fnv1a(token) ^ splitmix64(seed));
  Vector v(dim);
  for (double& x : v) x = rng.normal();
  normalize(v);
  return v;
}

ItemEmbedding pseudo_embed(const ItemRecord& item, std::size_t dim, std::uint64_t seed, Pooling mode) {
  check_dim(dim);
  if (item.tokens.empty()) throw DataError("item " + item.item_id + " has no tokens to embed");
  TokenEmbeddingSequence seq{item.item_id, {}};
  seq.vectors.reserve(item.tokens.size());
  for (const auto& t : item.tokens) seq.vectors.push_back(token_vector(t, dim, seed));
  ItemEmbedding e = pool(seq, mode);
  normalize(e.vector);
  e.normalized = true;
  return e;
}

EmbeddingMatrix pseudo_embed_catalog(const Catalog& catalog, std::size_t dim, std::uint64_t seed,
                                     Pooling mode) {
  std::vector<ItemEmbedding> rows;
  rows.reserve(catalog.size());
  for (const auto& it : catalog.items()) rows.push_back(pseudo_embed(it, dim, seed, mode));
  return EmbeddingMatrix(std::move(rows));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ConfigError("cosine of vectors with dimensions " + std::to_string(a.size()) +
                      " and " + std::to_string(b.size()));
  const double na = norm(a), nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw DataError("cosine of a zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::vector<std::pair<std::size_t, double>> top_k_semantic_rows(
    std::span<const double> query, const EmbeddingMatrix& matrix, std::size_t k,
    const std::vector<bool>& excluded) {
  if (k < 1) throw ConfigError("top_k_semantic needs k >= 1");
  if (query.size() != matrix.dim())
    throw ConfigError("query dimension " + std::to_string(query.size()) +
                      " does not match embedding dimension " + std::to_string(matrix.dim()));
  std::vector<std::pair<std::size_t, double>> scored;
  scored.reserve(matrix.rows());
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    if (i < excluded.size() && excluded[i]) continue;
    scored.emplace_back(i, cosine(query, matrix.row(i)));
  }
  const std::size_t take = std::min(k, scored.size());
  auto cmp = [&](const auto& a, const auto& b) {
    return ranks_before(a.second, matrix.id(a.first), b.second, matrix.id(b.first));
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), cmp);
  scored.resize(take);
  return scored;
}

std::vector<ScoredItem> top_k_semantic(std::span<const double> query,
                                       const EmbeddingMatrix& matrix, std::size_t k,
                                       const ItemSet& exclude) {
  std::vector<bool> mask(matrix.rows(), false);
  for (const auto& id : exclude)
    if (auto pos = matrix.find(id)) mask[*pos] = true;
  std::vector<ScoredItem> out;
  for (const auto& [row, s] : top_k_semantic_rows(query, matrix, k, mask))
    out.push_back({matrix.id(row), s});
  return out;
}

}  // namespace ltrec
