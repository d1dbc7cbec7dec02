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

#include "ltrec/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ltrec/errors.hpp"
#include "ltrec/io.hpp"

namespace ltrec {

void PipelineConfig::validate() const {
  if (history_length < 1) throw ConfigError("history length must be >= 1");
  intent_train.validate();
  if (k_neighbors < 1) throw ConfigError("k_neighbors must be >= 1");
  bpr.train.validate();
  if (bpr.factors < 1) throw ConfigError("bpr factors must be >= 1");
  if (!(bpr.reg >= 0.0)) throw ConfigError("bpr reg must be >= 0");
  if (!(bpr.init_std > 0.0)) throw ConfigError("bpr init_std must be > 0");
  for (double w : {action_weights.click, action_weights.cart, action_weights.purchase})
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("action weights must be positive");
  if (markov_order < 1) throw ConfigError("markov order must be >= 1");
  if (!(markov_alpha > 0.0) || !std::isfinite(markov_alpha)) throw ConfigError("markov alpha must be > 0");
  if (filter_min_length < 1) throw ConfigError("filter min_length must be >= 1");
  align_config.train.validate();
  if (beam_width < 1) throw ConfigError("beam width must be >= 1");
  if (ctr_weight < 0.0 || cvr_weight < 0.0 || (ctr_weight == 0.0 && cvr_weight == 0.0))
    throw ConfigError("feedback weights must be >= 0 and not both 0");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation fraction must lie in (0, 1)");
  weights.validate();
  if (k_each < 1) throw ConfigError("k_each must be >= 1");
}

std::string PipelineConfig::component_key() const {
  std::ostringstream o;
  auto tc = [&](const TrainingConfig& t) {
    o << t.epochs << ',' << t.batch_size << ',' << io::exact(t.learning_rate) << ',' << t.seed << ','
      << t.negatives_per_positive << ';';
  };
  o << history_length << ';';
  tc(intent_train);
  o << static_cast<int>(cf_backend) << ';' << k_neighbors << ';';
  if (cf_backend == CfBackend::BPR) {
    tc(bpr.train);
    o << bpr.factors << ',' << io::exact(bpr.reg) << ',' << io::exact(bpr.init_std) << ';';
  }
  o << io::exact(action_weights.click) << ',' << io::exact(action_weights.cart) << ','
    << io::exact(action_weights.purchase) << ';';
  o << markov_order << ',' << io::exact(markov_alpha) << ',' << filter_min_length << ','
    << (filter_action ? static_cast<int>(*filter_action) : -1) << ';';
  o << align << ';';
  if (align) {
    tc(align_config.train);
    o << static_cast<int>(align_config.loss) << ',' << beam_width << ',' << io::exact(ctr_weight) << ','
      << io::exact(cvr_weight) << ',' << io::exact(validation_fraction) << ';';
  }
  return o.str();
}

SplitDataset validation_split(const Dataset& train, double fraction) {
  return chronological_split(train, fraction);
}

namespace {

std::vector<std::size_t> sequence_rows(const Dataset& d, std::size_t user_pos) {
  std::vector<std::size_t> rows;
  for (const auto& r : d.sequence(user_pos)) rows.push_back(d.catalog().index_of(r.item_id));
  return rows;
}

std::vector<bool> history_mask(const std::vector<std::size_t>& rows, std::size_t n) {
  std::vector<bool> m(n, false);
  for (auto r : rows) m[r] = true;
  return m;
}

}  // namespace

std::vector<CandidateRanking> make_alignment_rankings(const MarkovModel& model, const SplitDataset& inner,
                                                      const PipelineConfig& config) {
  const FeedbackTable feedback(inner.test);
  const auto& vocab = model.vocab();
  std::vector<CandidateRanking> out;
  for (std::size_t u = 0; u < inner.train.users().size(); ++u) {
    const auto& uid = inner.train.users()[u];
    if (!inner.test.has_user(uid)) continue;
    const auto rows = sequence_rows(inner.train, u);
    const auto mask = history_mask(rows, model.vocab_size());
    BeamCandidateSet set{uid, {}, config.beam_width};
    for (const auto& [j, lp] : beam_search_rows(model, rows, config.beam_width, mask, 1))
      set.candidates.push_back({vocab[j], lp});
    std::vector<std::string> ctx;
    for (auto c : model.context_of(rows)) ctx.push_back(vocab[c]);
    out.push_back(build_partial_order(set, ctx, feedback, config.ctr_weight, config.cvr_weight));
  }
  return out;
}

TrainedComponents train_components(const Dataset& train, std::shared_ptr<const EmbeddingMatrix> embeddings,
                                   const PipelineConfig& config, StageReports* reports) {
  config.validate();
  if (!embeddings) throw DependencyError("embeddings missing");
  if (embeddings->rows() != train.catalog().size()) throw DataError("embedding rows differ from catalog size");
  if (train.interactions().empty()) throw DataError("empty training split");

  StageReports local;
  StageReports& rep = reports ? *reports : local;

  TrainedComponents c{std::make_shared<const Dataset>(train), std::move(embeddings), {}, {}, {}, {}, {}};
  SplitDataset as_split{train, Dataset(train.catalog_ptr(), {}), 0.0};
  c.attention = train_intent(as_split, *c.embeddings, config.intent_train, config.history_length, &rep.intent);

  auto matrix = std::make_shared<const InteractionMatrix>(train, config.action_weights);
  c.matrix = matrix;
  if (config.cf_backend == CfBackend::ItemKNN)
    c.cf = CfScorer(matrix, ItemKnnModel(*matrix, config.k_neighbors));
  else
    c.cf = CfScorer(matrix, train_bpr(*matrix, config.bpr, &rep.cf));

  const Dataset filtered = filter_training_sequences(train, config.filter_min_length, config.filter_action);
  c.markov = fit_markov(filtered, config.markov_order, config.markov_alpha);
  c.aligned_markov = c.markov;
  if (config.align) {
    const SplitDataset inner = validation_split(train, config.validation_fraction);
    const auto rankings = make_alignment_rankings(c.markov, inner, config);
    rep.rankings = rankings.size();
    if (!rankings.empty()) c.aligned_markov = align_generative(c.markov, rankings, config.align_config, &rep.align);
  }
  return c;
}

Recommender::Recommender(std::shared_ptr<const TrainedComponents> components, FusionWeights weights,
                         Normalization normalization, std::size_t k_each, std::size_t history_length)
    : c_(std::move(components)),
      weights_(weights),
      norm_(normalization),
      k_each_(k_each),
      history_length_(history_length) {
  if (!c_ || !c_->train || !c_->embeddings || !c_->cf.initialized())
    throw DependencyError("recommender components are not initialized");
  weights_.validate();
  if (k_each_ < 1) throw ConfigError("k_each must be >= 1");
  if (history_length_ < 1) throw ConfigError("history length must be >= 1");
}

UserState Recommender::prepare(const std::string& user_id) const {
  const Dataset& d = *c_->train;
  if (!d.has_user(user_id)) throw ColdUserError("user " + user_id + " has no training history");
  UserState s;
  s.user_id = user_id;
  for (const auto& r : d.sequence(user_id)) s.history.push_back(d.catalog().index_of(r.item_id));
  s.excluded = history_mask(s.history, d.catalog().size());

  const std::size_t n = std::min(s.history.size(), history_length_);
  s.intent = intent_rows(std::span(s.history).last(n), c_->attention, *c_->embeddings);
  s.intent.user_id = user_id;

  s.matrix_user = *c_->matrix->user_index(user_id);
  s.cf_scores = c_->cf.score_all(s.matrix_user);

  const auto p = c_->aligned_markov.distribution(c_->aligned_markov.context_of(s.history));
  s.gen_log_probs.resize(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) s.gen_log_probs[j] = std::log(p[j]);
  return s;
}

std::vector<std::size_t> Recommender::semantic_top(const UserState& s, std::size_t n) const {
  std::vector<std::size_t> out;
  if (norm(s.intent.h) == 0.0) return out;
  for (const auto& [j, _] : top_k_semantic_rows(s.intent.h, *c_->embeddings, n, s.excluded)) out.push_back(j);
  return out;
}

std::vector<std::size_t> Recommender::cf_top(const UserState& s, std::size_t n) const {
  const auto& ids = catalog();
  std::vector<std::size_t> pool;
  for (std::size_t j = 0; j < s.cf_scores.size(); ++j)
    if (!s.excluded[j]) pool.push_back(j);
  const std::size_t take = std::min(n, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (s.cf_scores[a] != s.cf_scores[b]) return s.cf_scores[a] > s.cf_scores[b];
                      return ids[a].item_id < ids[b].item_id;
                    });
  pool.resize(take);
  return pool;
}

std::vector<std::size_t> Recommender::generative_top(const UserState& s, std::size_t n) const {
  std::vector<std::size_t> out;
  for (const auto& [j, _] : beam_search_rows(c_->aligned_markov, s.history, n, s.excluded, 1)) out.push_back(j);
  return out;
}

std::vector<std::size_t> Recommender::recall_candidates(const UserState& s, std::size_t k_each) const {
  if (k_each < 1) throw ConfigError("k_each must be >= 1");
  std::vector<bool> in(catalog().size(), false);
  for (const auto& src : {semantic_top(s, k_each), cf_top(s, k_each), generative_top(s, k_each)})
    for (auto j : src) in[j] = true;
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < in.size(); ++j)
    if (in[j]) out.push_back(j);
  return out;
}

std::vector<std::string> Recommender::recall_candidates(const std::string& user_id, std::size_t k_each) const {
  std::vector<std::string> out;
  for (auto j : recall_candidates(prepare(user_id), k_each)) out.push_back(catalog()[j].item_id);
  return out;
}

CandidateScores Recommender::score_candidates(const UserState& s, const std::vector<std::size_t>& candidates,
                                              Normalization norm_mode) const {
  if (candidates.empty()) throw DataError("no candidates to score");
  CandidateScores out;
  out.items = candidates;
  const bool has_intent = norm(s.intent.h) > 0.0;
  out.raw.reserve(candidates.size());
  for (auto j : candidates) {
    if (j >= catalog().size()) throw DataError("candidate outside the catalog");
    const double sem = has_intent ? cosine(s.intent.h, c_->embeddings->row(j)) : 0.0;
    out.raw.push_back({sem, s.cf_scores[j], s.gen_log_probs[j]});
  }
  out.normalized = out.raw;
  normalize_channels(out.normalized, norm_mode);
  return out;
}

std::map<std::string, ScoreTriple> Recommender::score_candidates(const std::string& user_id,
                                                                 const ItemSet& candidates,
                                                                 Normalization norm_mode) const {
  const UserState s = prepare(user_id);
  std::vector<std::size_t> rows;
  for (const auto& id : candidates) {
    auto j = catalog().find(id);
    if (!j) throw DataError("candidate " + id + " not in catalog");
    rows.push_back(*j);
  }
  std::sort(rows.begin(), rows.end());
  const auto sc = score_candidates(s, rows, norm_mode);
  std::map<std::string, ScoreTriple> out;
  for (std::size_t i = 0; i < rows.size(); ++i) out[catalog()[rows[i]].item_id] = sc.normalized[i];
  return out;
}

CandidateScores Recommender::candidates_for(const UserState& s, std::size_t k) const {
  return score_candidates(s, recall_candidates(s, std::max(k_each_, k)), norm_);
}

RecommendationList Recommender::rank(const UserState& s, const CandidateScores& c, const FusionWeights& w,
                                     std::size_t k) const {
  std::vector<const std::string*> ids;
  ids.reserve(c.items.size());
  for (auto j : c.items) ids.push_back(&catalog()[j].item_id);
  RecommendationList out;
  out.user_id = s.user_id;
  out.k = k;
  for (auto pos : fuse_rank(c.normalized, ids, w, k))
    out.items.push_back({*ids[pos], fused_score(c.normalized[pos], w)});
  return out;
}

RecommendationList Recommender::recommend(const std::string& user_id, std::size_t k) const {
  if (k < 1) throw ConfigError("k must be >= 1");
  const UserState s = prepare(user_id);
  if (std::all_of(s.excluded.begin(), s.excluded.end(), [](bool b) { return b; }))
    return RecommendationList{user_id, {}, k};
  return rank(s, candidates_for(s, k), weights_, k);
}

namespace {

double case_metric(const TuningCase& tc, const std::vector<std::size_t>& top, TuningMetric metric) {
  if (metric == TuningMetric::Recall50) {
    std::size_t hit = 0;
    for (auto pos : top) hit += tc.relevant.count(tc.scores.items[pos]);
    return static_cast<double>(hit) / static_cast<double>(tc.relevant.size());
  }
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t r = 0; r < top.size(); ++r)
    if (tc.relevant.count(tc.scores.items[top[r]])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  const std::size_t ideal = std::min<std::size_t>(tc.relevant.size(), 10);
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

std::size_t metric_depth(TuningMetric m) { return m == TuningMetric::Recall50 ? 50 : 10; }

}  // namespace

GridSearchResult grid_search_cases(const std::vector<TuningCase>& cases, const std::vector<FusionWeights>& points,
                                   TuningMetric metric) {
  if (cases.empty()) throw DataError("empty validation slice");
  GridSearchResult out;
  out.points = points;
  const std::size_t k = metric_depth(metric);
  for (const auto& w : points) {
    double sum = 0.0;
    for (const auto& tc : cases) sum += case_metric(tc, fuse_rank(tc.scores.normalized, tc.ids, w, k), metric);
    out.metric.push_back(sum / static_cast<double>(cases.size()));
  }
  out.best = points[select_best_weights(out.points, out.metric)];
  return out;
}

GridSearchResult grid_search(const SplitDataset& split, std::shared_ptr<const EmbeddingMatrix> embeddings,
                             double grid_step, TuningMetric metric, const PipelineConfig& config) {
  const auto points = simplex_grid(grid_step);
  const SplitDataset inner = validation_split(split.train, config.validation_fraction);
  if (inner.test.interactions().empty()) throw DataError("empty validation slice");

  auto comps = std::make_shared<const TrainedComponents>(train_components(inner.train, std::move(embeddings), config));
  const Recommender rec(comps, config.weights, config.normalization, config.k_each, config.history_length);

  std::vector<TuningCase> cases;
  for (const auto& uid : inner.test.users()) {
    if (!inner.train.has_user(uid)) continue;
    UserState s = rec.prepare(uid);
    TuningCase tc;
    for (const auto& r : inner.test.sequence(uid)) {
      const auto j = rec.catalog().index_of(r.item_id);
      if (!s.excluded[j]) tc.relevant.insert(j);
    }
    if (tc.relevant.empty()) continue;
    tc.scores = rec.candidates_for(s, metric_depth(metric));
    for (auto j : tc.scores.items) tc.ids.push_back(&rec.catalog()[j].item_id);
    cases.push_back(std::move(tc));
  }
  return grid_search_cases(cases, points, metric);
}

}  // namespace ltrec
