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

#include "ltrec/cf_scorer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ltrec/errors.hpp"
#include "ltrec/io.hpp"
#include "ltrec/rng.hpp"

namespace ltrec {

// ---------------------------------------------------------------------------
// InteractionMatrix

InteractionMatrix::InteractionMatrix(const Dataset& train, const ActionWeights& weights) {
  const auto& cat = train.catalog();
  item_ids_.reserve(cat.size());
  for (std::size_t i = 0; i < cat.size(); ++i) {
    item_ids_.push_back(cat[i].item_id);
    item_index_.emplace(cat[i].item_id, i);
  }
  user_ids_ = train.users();
  for (std::size_t u = 0; u < user_ids_.size(); ++u) user_index_.emplace(user_ids_[u], u);

  rows_.resize(user_ids_.size());
  cols_.resize(item_ids_.size());
  for (std::size_t u = 0; u < user_ids_.size(); ++u) {
    std::map<std::size_t, double> acc;
    for (const auto& r : train.sequence(u)) {
      const double w = weights.of(r.action);
      if (w < 0.0) throw ConfigError("action weights must be >= 0");
      auto [it, fresh] = acc.emplace(cat.index_of(r.item_id), w);
      if (!fresh) it->second = std::max(it->second, w);
    }
    rows_[u].assign(acc.begin(), acc.end());
    for (const auto& [i, w] : rows_[u]) cols_[i].emplace_back(u, w);
    nnz_ += rows_[u].size();
  }
}

std::optional<std::size_t> InteractionMatrix::user_index(const std::string& id) const {
  auto it = user_index_.find(id);
  if (it == user_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> InteractionMatrix::item_index(const std::string& id) const {
  auto it = item_index_.find(id);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

double InteractionMatrix::entry(std::size_t u, std::size_t i) const {
  const auto& row = rows_[u];
  auto it = std::lower_bound(row.begin(), row.end(), std::make_pair(i, -HUGE_VAL));
  return (it != row.end() && it->first == i) ? it->second : 0.0;
}

InteractionMatrix build_matrix(const SplitDataset& split, const ActionWeights& weights) {
  return InteractionMatrix(split.train, weights);
}

// ---------------------------------------------------------------------------
// Item kNN

namespace {

double column_norm(const SparseRow& col) {
  double s = 0.0;
  for (const auto& [u, w] : col) s += w * w;
  return std::sqrt(s);
}

}  // namespace

double ItemKnnModel::similarity(const InteractionMatrix& m, std::size_t i, std::size_t j) {
  const auto& a = m.item_column(i);
  const auto& b = m.item_column(j);
  const double na = column_norm(a), nb = column_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  // Accumulate w_uj * w_ui over ascending users, the same order the model
  // build uses, so sim(i, j) and sim(j, i) agree bit for bit.
  double s = 0.0;
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) ++ia;
    else if (ib->first < ia->first) ++ib;
    else {
      s += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  if (i == j) return 1.0;
  return s / (na * nb);
}

ItemKnnModel::ItemKnnModel(const InteractionMatrix& m, std::size_t k_neighbors) : k_(k_neighbors) {
  if (k_ < 1) throw ConfigError("k_neighbors must be >= 1");
  const std::size_t n = m.n_items();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = column_norm(m.item_column(i));

  neighbors_.assign(n, {});
  std::vector<double> co(n, 0.0);
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> touched;
  for (std::size_t j = 0; j < n; ++j) {
    if (norms[j] == 0.0) continue;
    touched.clear();
    for (const auto& [u, wj] : m.item_column(j)) {
      for (const auto& [i, wi] : m.user_row(u)) {
        if (i == j) continue;
        if (!seen[i]) {
          seen[i] = 1;
          touched.push_back(i);
        }
        co[i] += wj * wi;
      }
    }
    SparseRow cand;
    cand.reserve(touched.size());
    for (auto i : touched) {
      if (co[i] > 0.0) cand.emplace_back(i, co[i] / (norms[i] * norms[j]));
      co[i] = 0.0;
      seen[i] = 0;
    }
    const auto& ids = m.item_ids();
    auto cmp = [&](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return ids[a.first] < ids[b.first];
    };
    const std::size_t take = std::min(k_, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), cmp);
    cand.resize(take);
    neighbors_[j] = std::move(cand);
  }
  build_inverse();
}

void ItemKnnModel::build_inverse() {
  inverse_.assign(neighbors_.size(), {});
  for (std::size_t j = 0; j < neighbors_.size(); ++j)
    for (const auto& [i, s] : neighbors_[j]) inverse_[i].emplace_back(j, s);
}

double ItemKnnModel::score(const InteractionMatrix& m, std::size_t user, std::size_t item) const {
  const auto& nb = neighbors_[item];
  double s = 0.0;
  for (const auto& [i, w] : m.user_row(user)) {
    for (const auto& [n, sim] : nb) {
      if (n == i) {
        s += sim * w;
        break;
      }
    }
  }
  return s;
}

std::vector<double> ItemKnnModel::score_all(const InteractionMatrix& m, std::size_t user) const {
  std::vector<double> out(neighbors_.size(), 0.0);
  for (const auto& [i, w] : m.user_row(user))
    for (const auto& [j, sim] : inverse_[i]) out[j] += sim * w;
  return out;
}

// Layout: "ltrec-itemknn 1 <k> <n_items>", then per item
// "<item_id> <count> <neighbor_id> <sim> ...".
void ItemKnnModel::save(const InteractionMatrix& m, const std::filesystem::path& path) const {
  std::string out = "ltrec-itemknn 1 " + std::to_string(k_) + " " +
                    std::to_string(neighbors_.size()) + "\n";
  for (std::size_t j = 0; j < neighbors_.size(); ++j) {
    out += m.item_ids()[j] + " " + std::to_string(neighbors_[j].size());
    for (const auto& [i, s] : neighbors_[j]) out += " " + m.item_ids()[i] + " " + io::exact(s);
    out += '\n';
  }
  io::write_file(path, out);
}

ItemKnnModel ItemKnnModel::load(const InteractionMatrix& m, const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  const std::string where = path.string();
  if (lines.empty()) throw DataError(where + ": empty item-kNN file");
  const auto head = io::split_ws(lines[0]);
  if (head.size() != 4 || head[0] != "ltrec-itemknn")
    throw DataError(where + ": bad item-kNN header");
  ItemKnnModel model;
  model.k_ = static_cast<std::size_t>(io::parse_int(head[2], "k"));
  const auto n = static_cast<std::size_t>(io::parse_int(head[3], "n_items"));
  if (n != m.n_items())
    throw DataError(where + ": model has " + std::to_string(n) + " items, catalog has " +
                    std::to_string(m.n_items()));
  model.neighbors_.assign(n, {});
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto t = io::split_ws(lines[ln]);
    const std::string at = where + ":" + std::to_string(ln + 1);
    if (t.size() < 2) throw DataError(at + ": truncated record");
    auto j = m.item_index(t[0]);
    if (!j) throw DataError(at + ": unknown item " + t[0]);
    const auto cnt = static_cast<std::size_t>(io::parse_int(t[1], "count"));
    if (t.size() != 2 + 2 * cnt) throw DataError(at + ": neighbor count mismatch");
    for (std::size_t c = 0; c < cnt; ++c) {
      auto i = m.item_index(t[2 + 2 * c]);
      if (!i) throw DataError(at + ": unknown neighbor " + t[2 + 2 * c]);
      model.neighbors_[*j].emplace_back(*i, io::parse_double(t[3 + 2 * c], "similarity"));
    }
  }
  model.build_inverse();
  return model;
}

double itemknn_score(const std::string& user, const std::string& item,
                     const InteractionMatrix& matrix, const ItemKnnModel& model) {
  auto u = matrix.user_index(user);
  if (!u) throw DataError("unknown user " + user);
  auto i = matrix.item_index(item);
  if (!i) throw DataError("unknown item " + item);
  return model.score(matrix, *u, *i);
}

// ---------------------------------------------------------------------------
// BPR-MF

double MFModel::predict(std::size_t u, std::size_t i) const {
  const double* p = user_factors.data() + u * factors;
  const double* q = item_factors.data() + i * factors;
  double s = 0.0;
  for (std::size_t k = 0; k < factors; ++k) s += p[k] * q[k];
  return s;
}

// Layout: "ltrec-mf 1 <n_users> <n_items> <factors>", then n_users rows of
// user factors and n_items rows of item factors.
void save_mf(const MFModel& m, const std::filesystem::path& path) {
  std::string out = "ltrec-mf 1 " + std::to_string(m.n_users()) + " " +
                    std::to_string(m.n_items()) + " " + std::to_string(m.factors) + "\n";
  auto rows = [&](const std::vector<double>& v) {
    for (std::size_t r = 0; r * m.factors < v.size(); ++r) {
      for (std::size_t k = 0; k < m.factors; ++k) {
        if (k) out += ' ';
        out += io::exact(v[r * m.factors + k]);
      }
      out += '\n';
    }
  };
  rows(m.user_factors);
  rows(m.item_factors);
  io::write_file(path, out);
}

MFModel load_mf(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  const std::string where = path.string();
  if (lines.empty()) throw DataError(where + ": empty MF file");
  const auto head = io::split_ws(lines[0]);
  if (head.size() != 5 || head[0] != "ltrec-mf") throw DataError(where + ": bad MF header");
  const auto nu = static_cast<std::size_t>(io::parse_int(head[2], "n_users"));
  const auto ni = static_cast<std::size_t>(io::parse_int(head[3], "n_items"));
  MFModel m;
  m.factors = static_cast<std::size_t>(io::parse_int(head[4], "factors"));
  if (m.factors < 1) throw DataError(where + ": factors must be >= 1");
  if (lines.size() < 1 + nu + ni) throw DataError(where + ": truncated MF file");
  auto read = [&](std::size_t first, std::size_t count, std::vector<double>& v) {
    for (std::size_t r = 0; r < count; ++r) {
      const auto t = io::split_ws(lines[first + r]);
      if (t.size() != m.factors)
        throw DataError(where + ":" + std::to_string(first + r + 1) + ": wrong factor count");
      for (const auto& x : t) v.push_back(io::parse_double(x, "factor"));
    }
  };
  read(1, nu, m.user_factors);
  read(1 + nu, ni, m.item_factors);
  return m;
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double neg_log_sigmoid(double x) {
  if (x >= 0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

bool in_row(const SparseRow& row, std::size_t i) {
  auto it = std::lower_bound(row.begin(), row.end(), std::make_pair(i, -HUGE_VAL));
  return it != row.end() && it->first == i;
}

}  // namespace

double bpr_sample_loss(const MFModel& m, std::size_t u, std::size_t i, std::size_t j, double reg,
                       BprGradient* grad) {
  const std::size_t f = m.factors;
  const double* p = m.user_factors.data() + u * f;
  const double* qi = m.item_factors.data() + i * f;
  const double* qj = m.item_factors.data() + j * f;
  double x = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < f; ++k) {
    x += p[k] * (qi[k] - qj[k]);
    sq += p[k] * p[k] + qi[k] * qi[k] + qj[k] * qj[k];
  }
  const double loss = neg_log_sigmoid(x) + 0.5 * reg * sq;
  if (grad) {
    const double dx = sigmoid(x) - 1.0;  // d/dx of -ln sigmoid(x)
    grad->user.resize(f);
    grad->pos.resize(f);
    grad->neg.resize(f);
    for (std::size_t k = 0; k < f; ++k) {
      grad->user[k] = dx * (qi[k] - qj[k]) + reg * p[k];
      grad->pos[k] = dx * p[k] + reg * qi[k];
      grad->neg[k] = -dx * p[k] + reg * qj[k];
    }
  }
  return loss;
}

std::vector<BprSample> sample_bpr_triples(const InteractionMatrix& m, std::size_t count,
                                          std::uint64_t seed) {
  std::vector<std::size_t> eligible;
  for (std::size_t u = 0; u < m.n_users(); ++u) {
    const auto sz = m.user_row(u).size();
    if (sz > 0 && sz < m.n_items()) eligible.push_back(u);
  }
  if (eligible.empty()) throw DataError("BPR needs a user with at least one positive and one negative");
  Rng rng(seed);
  std::vector<BprSample> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t u = eligible[rng.below(eligible.size())];
    const auto& row = m.user_row(u);
    const std::size_t i = row[rng.below(row.size())].first;
    std::size_t j;
    do {
      j = rng.below(m.n_items());
    } while (in_row(row, j));
    out.push_back({u, i, j});
  }
  return out;
}

MFModel init_mf(const InteractionMatrix& m, std::size_t factors, double init_std,
                std::uint64_t seed) {
  if (factors < 1) throw ConfigError("latent dimension f must be >= 1");
  MFModel model;
  model.factors = factors;
  Rng rng(seed);
  model.user_factors.resize(m.n_users() * factors);
  model.item_factors.resize(m.n_items() * factors);
  for (double& x : model.user_factors) x = init_std * rng.normal();
  for (double& x : model.item_factors) x = init_std * rng.normal();
  return model;
}

MFModel train_bpr(const InteractionMatrix& m, const BprConfig& config, TrainingReport* report) {
  config.train.validate();
  if (config.factors < 1) throw ConfigError("latent dimension f must be >= 1");
  if (m.nnz() == 0) throw DataError("BPR needs at least one positive entry");
  MFModel model = init_mf(m, config.factors, config.init_std, config.train.seed);
  const std::size_t f = config.factors;

  std::vector<BprSample> probe;
  auto probe_loss = [&] {
    double s = 0.0;
    for (const auto& t : probe) s += bpr_sample_loss(model, t.user, t.pos, t.neg, config.reg);
    return s / static_cast<double>(probe.size());
  };
  if (report) {
    probe = sample_bpr_triples(m, std::min<std::size_t>(m.nnz(), 10000), config.train.seed ^ 0xbeefULL);
    report->epoch_loss.clear();
    report->initial_loss = probe_loss();
  }

  std::vector<double> gu(model.user_factors.size(), 0.0), gi(model.item_factors.size(), 0.0);
  std::vector<std::size_t> touched_u, touched_i;
  BprGradient g;
  const auto batch = static_cast<std::size_t>(config.train.batch_size);
  const double lr = config.train.learning_rate;

  for (int epoch = 0; epoch < config.train.epochs; ++epoch) {
    const auto samples = sample_bpr_triples(
        m, m.nnz(), config.train.seed + 1000003ULL * static_cast<std::uint64_t>(epoch + 1));
    for (std::size_t start = 0; start < samples.size(); start += batch) {
      const std::size_t end = std::min(samples.size(), start + batch);
      for (std::size_t s = start; s < end; ++s) {
        const auto& t = samples[s];
        bpr_sample_loss(model, t.user, t.pos, t.neg, config.reg, &g);
        touched_u.push_back(t.user);
        touched_i.push_back(t.pos);
        touched_i.push_back(t.neg);
        for (std::size_t k = 0; k < f; ++k) {
          gu[t.user * f + k] += g.user[k];
          gi[t.pos * f + k] += g.pos[k];
          gi[t.neg * f + k] += g.neg[k];
        }
      }
      for (auto u : touched_u)
        for (std::size_t k = 0; k < f; ++k) {
          model.user_factors[u * f + k] -= lr * gu[u * f + k];
          gu[u * f + k] = 0.0;
        }
      for (auto i : touched_i)
        for (std::size_t k = 0; k < f; ++k) {
          model.item_factors[i * f + k] -= lr * gi[i * f + k];
          gi[i * f + k] = 0.0;
        }
      touched_u.clear();
      touched_i.clear();
    }
    if (report) report->epoch_loss.push_back(probe_loss());
  }
  return model;
}

// ---------------------------------------------------------------------------

void CfScorer::require() const {
  if (!matrix_) throw DependencyError("collaborative filtering backend not initialized");
}

double CfScorer::score(std::size_t user, std::size_t item) const {
  require();
  const double s = backend_ == CfBackend::ItemKNN ? knn_->score(*matrix_, user, item)
                                                 : mf_->predict(user, item);
  return std::isfinite(s) ? s : 0.0;
}

double CfScorer::score(const std::string& user, const std::string& item) const {
  require();
  auto u = matrix_->user_index(user);
  if (!u) throw DataError("unknown user " + user);
  auto i = matrix_->item_index(item);
  if (!i) throw DataError("unknown item " + item);
  return score(*u, *i);
}

std::vector<double> CfScorer::score_all(std::size_t user) const {
  require();
  if (backend_ == CfBackend::ItemKNN) return knn_->score_all(*matrix_, user);
  std::vector<double> out(matrix_->n_items());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mf_->predict(user, i);
  return out;
}

}  // namespace ltrec
