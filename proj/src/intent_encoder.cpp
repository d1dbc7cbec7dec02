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

#include "ltrec/intent_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ltrec/errors.hpp"
#include "ltrec/io.hpp"
#include "ltrec/rng.hpp"

namespace ltrec {

AttentionParams AttentionParams::zeros(std::size_t dim) {
  AttentionParams p;
  p.dim = dim;
  p.W.assign(dim * dim, 0.0);
  p.b.assign(dim, 0.0);
  p.u.assign(dim, 0.0);
  return p;
}

AttentionParams AttentionParams::initial(std::size_t dim, std::uint64_t seed) {
  AttentionParams p = zeros(dim);
  for (std::size_t i = 0; i < dim; ++i) p.w(i, i) = 0.1;
  Rng rng(seed);
  for (double& x : p.u) x = rng.uniform(-0.1, 0.1);
  return p;
}

void AttentionParams::validate() const {
  if (dim == 0) throw DataError("attention params with zero dimension");
  if (W.size() != dim * dim || b.size() != dim || u.size() != dim)
    throw DataError("attention params shape does not match dim " + std::to_string(dim));
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(W) || !finite(b) || !finite(u) || !std::isfinite(beta))
    throw DataError("attention params contain non-finite values");
}

// File layout (text, values in shortest round-trip form):
//   ltrec-attention 1
//   dim <d>
//   W            followed by d lines of d values
//   b <d values>
//   u <d values>
//   beta <value>
void save_attention_params(const AttentionParams& p, const std::filesystem::path& path) {
  p.validate();
  std::string out = "ltrec-attention 1\ndim " + std::to_string(p.dim) + "\nW\n";
  for (std::size_t r = 0; r < p.dim; ++r) {
    for (std::size_t c = 0; c < p.dim; ++c) {
      if (c) out += ' ';
      out += io::exact(p.w(r, c));
    }
    out += '\n';
  }
  auto vec = [&](const char* name, const Vector& v) {
    out += name;
    for (double x : v) out += ' ' + io::exact(x);
    out += '\n';
  };
  vec("b", p.b);
  vec("u", p.u);
  out += "beta " + io::exact(p.beta) + "\n";
  io::write_file(path, out);
}

AttentionParams load_attention_params(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  const std::string where = path.string();
  auto expect = [&](std::size_t n, std::string_view key) {
    if (n >= lines.size()) throw DataError(where + ": truncated attention file");
    auto toks = io::split_ws(lines[n]);
    if (toks.empty() || toks[0] != key)
      throw DataError(where + ":" + std::to_string(n + 1) + ": expected '" + std::string(key) + "'");
    return toks;
  };
  auto h = expect(0, "ltrec-attention");
  auto dtok = expect(1, "dim");
  if (dtok.size() != 2) throw DataError(where + ": bad dim line");
  const auto d = static_cast<std::size_t>(io::parse_int(dtok[1], "dim"));
  AttentionParams p = AttentionParams::zeros(d);
  expect(2, "W");
  for (std::size_t r = 0; r < d; ++r) {
    if (3 + r >= lines.size()) throw DataError(where + ": truncated W");
    auto row = io::split_ws(lines[3 + r]);
    if (row.size() != d) throw DataError(where + ":" + std::to_string(4 + r) + ": W row width");
    for (std::size_t c = 0; c < d; ++c) p.w(r, c) = io::parse_double(row[c], "W");
  }
  auto read_vec = [&](std::size_t n, std::string_view key, Vector& v) {
    auto toks = expect(n, key);
    if (toks.size() != d + 1) throw DataError(where + ": bad length for " + std::string(key));
    for (std::size_t k = 0; k < d; ++k) v[k] = io::parse_double(toks[k + 1], key);
  };
  read_vec(3 + d, "b", p.b);
  read_vec(4 + d, "u", p.u);
  auto bt = expect(5 + d, "beta");
  if (bt.size() != 2) throw DataError(where + ": bad beta line");
  p.beta = io::parse_double(bt[1], "beta");
  p.validate();
  return p;
}

UserHistory make_history(const Dataset& d, const std::string& user_id, std::size_t max_length) {
  UserHistory h{user_id, {}};
  const auto seq = d.sequence(user_id);
  const std::size_t start = seq.size() > max_length ? seq.size() - max_length : 0;
  for (std::size_t i = start; i < seq.size(); ++i) h.items.push_back(seq[i].item_id);
  return h;
}

namespace {

std::vector<std::size_t> resolve(const UserHistory& history, const EmbeddingMatrix& m) {
  if (history.items.empty())
    throw DataError("empty history for user " + history.user_id);
  std::vector<std::size_t> rows;
  rows.reserve(history.items.size());
  for (const auto& id : history.items) {
    auto pos = m.find(id);
    if (!pos) throw DataError("history item " + id + " has no embedding");
    rows.push_back(*pos);
  }
  return rows;
}

void check_params(const AttentionParams& p, const EmbeddingMatrix& m) {
  if (p.dim != m.dim())
    throw ConfigError("attention dim " + std::to_string(p.dim) + " != embedding dim " +
                      std::to_string(m.dim()));
}

// z = tanh(W e + b)
void project(const AttentionParams& p, std::span<const double> e, double* z) {
  const std::size_t d = p.dim;
  for (std::size_t r = 0; r < d; ++r) {
    const double* wr = p.W.data() + r * d;
    double a = p.b[r];
    for (std::size_t c = 0; c < d; ++c) a += wr[c] * e[c];
    z[r] = std::tanh(a);
  }
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// -ln sigmoid(x), stable for large |x|.
double neg_log_sigmoid(double x) {
  if (x >= 0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

}  // namespace

Vector stable_softmax(std::span<const double> logits) {
  Vector out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += out[i] = std::exp(logits[i] - mx);
  for (double& x : out) x /= sum;
  return out;
}

Vector attention_logits_rows(std::span<const std::size_t> rows, const AttentionParams& params,
                             const EmbeddingMatrix& embeddings) {
  check_params(params, embeddings);
  if (rows.empty()) throw DataError("attention over an empty history");
  Vector logits(rows.size());
  Vector z(params.dim);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    project(params, embeddings.row(rows[t]), z.data());
    logits[t] = dot(params.u, z) + recency_term(params.beta, t + 1);
  }
  return logits;
}

IntentVector intent_rows(std::span<const std::size_t> rows, const AttentionParams& params,
                         const EmbeddingMatrix& embeddings) {
  IntentVector out;
  out.alphas = stable_softmax(attention_logits_rows(rows, params, embeddings));
  out.h.assign(embeddings.dim(), 0.0);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const auto e = embeddings.row(rows[t]);
    for (std::size_t k = 0; k < out.h.size(); ++k) out.h[k] += out.alphas[t] * e[k];
  }
  return out;
}

Vector attention_logits(const UserHistory& history, const AttentionParams& params,
                        const EmbeddingMatrix& embeddings) {
  return attention_logits_rows(resolve(history, embeddings), params, embeddings);
}

IntentVector intent(const UserHistory& history, const AttentionParams& params,
                    const EmbeddingMatrix& embeddings) {
  IntentVector out = intent_rows(resolve(history, embeddings), params, embeddings);
  out.user_id = history.user_id;
  return out;
}

// Backward pass, with z_t = tanh(W e_t + b), alpha = softmax(logit),
// h = sum alpha_t e_t, c_x = cos(h, e_x), L = -ln sigmoid(c_pos - c_neg):
//   dL/dh       = (sigmoid(D) - 1) (dc_pos/dh - dc_neg/dh),  dc/dh = (e^ - c h^) / |h|
//   q_t         = dL/dh . e_t
//   r_t         = alpha_t (q_t - sum_s alpha_s q_s)          (dL/dlogit_t)
//   dL/du       = sum r_t z_t         dL/dbeta = sum r_t t
//   g_t         = r_t u * (1 - z_t^2)
//   dL/db       = sum g_t             dL/dW    = sum g_t e_t^T
double intent_triple_loss(const IntentTriple& triple, const AttentionParams& params,
                          const EmbeddingMatrix& embeddings, AttentionGradient* grad,
                          double scale) {
  const std::size_t d = params.dim;
  const std::size_t T = triple.history.size();
  if (T == 0) throw DataError("intent triple with empty history");

  std::vector<double> z(T * d);
  Vector logits(T);
  for (std::size_t t = 0; t < T; ++t) {
    project(params, embeddings.row(triple.history[t]), z.data() + t * d);
    logits[t] = dot(params.u, std::span<const double>(z.data() + t * d, d)) +
                recency_term(params.beta, t + 1);
  }
  const Vector alpha = stable_softmax(logits);
  Vector h(d, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const auto e = embeddings.row(triple.history[t]);
    for (std::size_t k = 0; k < d; ++k) h[k] += alpha[t] * e[k];
  }
  const double hn = norm(h);
  if (!(hn > 1e-12)) return neg_log_sigmoid(0.0);  // degenerate intent, no gradient

  const auto ep = embeddings.row(triple.positive);
  const auto en = embeddings.row(triple.negative);
  const double np = norm(ep), nn = norm(en);
  const double cp = dot(h, ep) / (hn * np);
  const double cn = dot(h, en) / (hn * nn);
  const double margin = cp - cn;
  const double loss = neg_log_sigmoid(margin);
  if (!grad) return loss;

  const double dmargin = (sigmoid(margin) - 1.0) * scale;
  Vector gh(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double hk = h[k] / hn;
    const double dcp = (ep[k] / np - cp * hk) / hn;
    const double dcn = (en[k] / nn - cn * hk) / hn;
    gh[k] = dmargin * (dcp - dcn);
  }
  Vector q(T);
  double qbar = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    q[t] = dot(gh, embeddings.row(triple.history[t]));
    qbar += alpha[t] * q[t];
  }
  for (std::size_t t = 0; t < T; ++t) {
    const double r = alpha[t] * (q[t] - qbar);
    const double* zt = z.data() + t * d;
    const auto e = embeddings.row(triple.history[t]);
    grad->beta += r * static_cast<double>(t + 1);
    for (std::size_t k = 0; k < d; ++k) {
      grad->u[k] += r * zt[k];
      const double g = r * params.u[k] * (1.0 - zt[k] * zt[k]);
      grad->b[k] += g;
      double* gw = grad->W.data() + k * d;
      for (std::size_t c = 0; c < d; ++c) gw[c] += g * e[c];
    }
  }
  return loss;
}

std::vector<IntentTriple> make_intent_triples(const Dataset& train,
                                              const EmbeddingMatrix& embeddings,
                                              std::size_t max_length,
                                              const TrainingConfig& config) {
  config.validate();
  if (max_length < 1) throw ConfigError("history length must be >= 1");
  Rng rng(config.seed ^ 0x1d7e4a11ULL);
  std::vector<IntentTriple> out;
  const std::size_t n_items = embeddings.rows();
  for (std::size_t u = 0; u < train.users().size(); ++u) {
    const auto seq = train.sequence(u);
    if (seq.size() < 2) continue;
    std::vector<std::size_t> rows;
    rows.reserve(seq.size());
    for (const auto& r : seq) {
      auto pos = embeddings.find(r.item_id);
      if (!pos) throw DataError("train item " + r.item_id + " has no embedding");
      rows.push_back(*pos);
    }
    const std::unordered_set<std::size_t> seen(rows.begin(), rows.end());
    if (seen.size() >= n_items) continue;  // no admissible negative
    for (std::size_t p = 1; p < rows.size(); ++p) {
      const std::size_t start = p > max_length ? p - max_length : 0;
      for (int n = 0; n < config.negatives_per_positive; ++n) {
        std::size_t neg;
        do {
          neg = rng.below(n_items);
        } while (seen.count(neg));
        out.push_back({std::vector<std::size_t>(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                                rows.begin() + static_cast<std::ptrdiff_t>(p)),
                       rows[p], neg});
      }
    }
  }
  return out;
}

namespace {

double mean_loss(const std::vector<IntentTriple>& triples, const AttentionParams& p,
                 const EmbeddingMatrix& m) {
  double s = 0.0;
  for (const auto& t : triples) s += intent_triple_loss(t, p, m);
  return s / static_cast<double>(triples.size());
}

void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

AttentionParams train_intent_on_triples(const std::vector<IntentTriple>& triples,
                                        const EmbeddingMatrix& embeddings,
                                        const TrainingConfig& config, TrainingReport* report) {
  config.validate();
  if (triples.empty()) throw DataError("no trainable (history, next item, negative) triples");
  AttentionParams params = AttentionParams::initial(embeddings.dim(), config.seed);
  if (report) {
    report->epoch_loss.clear();
    report->initial_loss = mean_loss(triples, params, embeddings);
  }
  Rng rng(config.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(triples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      AttentionGradient g = AttentionParams::zeros(params.dim);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i)
        intent_triple_loss(triples[order[i]], params, embeddings, &g, scale);
      const double lr = -config.learning_rate;
      axpy(params.W, lr, g.W);
      axpy(params.b, lr, g.b);
      axpy(params.u, lr, g.u);
      params.beta += lr * g.beta;
    }
    if (report) report->epoch_loss.push_back(mean_loss(triples, params, embeddings));
  }
  return params;
}

AttentionParams train_intent(const SplitDataset& split, const EmbeddingMatrix& embeddings,
                             const TrainingConfig& config, std::size_t max_length,
                             TrainingReport* report) {
  return train_intent_on_triples(make_intent_triples(split.train, embeddings, max_length, config),
                                 embeddings, config, report);
}

}  // namespace ltrec
