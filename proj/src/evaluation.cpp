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

#include "ltrec/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include "ltrec/errors.hpp"
#include "ltrec/io.hpp"
#include "ltrec/rng.hpp"

namespace ltrec {

namespace {

void check_args(const ItemSet& relevant, std::size_t k) {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (relevant.empty()) throw DataError("empty relevant set");
}

std::size_t hits(std::span<const std::string> rec, const ItemSet& relevant, std::size_t k) {
  std::size_t h = 0;
  const std::size_t n = std::min(k, rec.size());
  for (std::size_t i = 0; i < n; ++i) h += relevant.count(rec[i]);
  return h;
}

double jaccard_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (const auto& x : sa) inter += sb.count(x);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 0.0 : 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

double recall_at_k(std::span<const std::string> recommended, const ItemSet& relevant, std::size_t k) {
  check_args(relevant, k);
  return static_cast<double>(hits(recommended, relevant, k)) / static_cast<double>(relevant.size());
}

double hit_rate_at_k(std::span<const std::string> recommended, const ItemSet& relevant, std::size_t k) {
  check_args(relevant, k);
  return hits(recommended, relevant, k) > 0 ? 1.0 : 0.0;
}

double ndcg_at_k(std::span<const std::string> recommended, const ItemSet& relevant, std::size_t k) {
  check_args(relevant, k);
  double dcg = 0.0;
  const std::size_t n = std::min(k, recommended.size());
  for (std::size_t r = 0; r < n; ++r)
    if (relevant.count(recommended[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  double idcg = 0.0;
  const std::size_t ideal = std::min(relevant.size(), k);
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

double diversity(const std::vector<std::vector<std::string>>& lists, std::size_t sample_pairs,
                 std::uint64_t seed) {
  const std::size_t n = lists.size();
  if (n < 2) throw DataError("diversity needs at least 2 users");
  std::vector<std::vector<std::string>> top(n);
  for (std::size_t u = 0; u < n; ++u)
    top[u].assign(lists[u].begin(), lists[u].begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(10, lists[u].size())));

  const double total_pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  double sum = 0.0;
  if (total_pairs <= static_cast<double>(sample_pairs)) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) sum += jaccard_distance(top[a], top[b]);
    return sum / total_pairs;
  }
  Rng rng(seed);
  for (std::size_t s = 0; s < sample_pairs; ++s) {
    const std::size_t a = rng.below(n);
    std::size_t b = rng.below(n - 1);
    if (b >= a) ++b;
    sum += jaccard_distance(top[a], top[b]);
  }
  return sum / static_cast<double>(sample_pairs);
}

double tail_coverage(const std::vector<std::vector<std::string>>& lists, const Dataset& catalog, bool distinct) {
  const Catalog& c = catalog.catalog();
  auto is_tail = [&](const std::string& id) {
    const auto& item = c[c.index_of(id)];
    if (!item.tail_flag) throw DataError("tail flags are not assigned (item " + id + ")");
    return *item.tail_flag == TailFlag::Tail;
  };
  std::size_t tail = 0, total = 0;
  if (distinct) {
    std::set<std::string> seen;
    for (const auto& l : lists) seen.insert(l.begin(), l.end());
    for (const auto& id : seen) tail += is_tail(id);
    total = seen.size();
  } else {
    for (const auto& l : lists)
      for (const auto& id : l) {
        tail += is_tail(id);
        ++total;
      }
  }
  return total == 0 ? 0.0 : static_cast<double>(tail) / static_cast<double>(total);
}

LatencyStats latency_stats(std::vector<double> samples_ms) {
  LatencyStats s;
  if (samples_ms.empty()) return s;
  s.samples_ms = samples_ms;
  std::sort(samples_ms.begin(), samples_ms.end());
  const std::size_t n = samples_ms.size();
  s.median_ms = n % 2 ? samples_ms[n / 2] : 0.5 * (samples_ms[n / 2 - 1] + samples_ms[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95_ms = samples_ms[std::max<std::size_t>(rank, 1) - 1];
  double sum = 0.0;
  for (double x : samples_ms) sum += x;
  s.mean_ms = sum / static_cast<double>(n);
  return s;
}

LatencyStats measure_latency(const std::function<void(const std::string&)>& fn,
                             const std::vector<std::string>& users, std::size_t warmup) {
  if (users.empty()) throw DataError("latency sample is empty");
  for (std::size_t i = 0; i < warmup; ++i) fn(users[i % users.size()]);
  std::vector<double> ms;
  ms.reserve(users.size());
  for (const auto& u : users) {
    const auto t0 = std::chrono::steady_clock::now();
    fn(u);
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return latency_stats(std::move(ms));
}

void EvalConfig::validate() const {
  if (ks.empty()) throw ConfigError("K list must not be empty");
  for (auto k : ks)
    if (k < 1) throw ConfigError("every K must be >= 1");
  if (diversity_pairs < 1) throw ConfigError("diversity sample_pairs must be >= 1");
  if (diversity_k < 1 || tail_k < 1) throw ConfigError("diversity/tail list sizes must be >= 1");
}

std::string MetricReport::to_kv() const {
  std::ostringstream o;
  for (const auto& [k, v] : recall_at) o << "recall@" << k << ' ' << io::sig6(v) << '\n';
  for (const auto& [k, v] : hit_rate_at) o << "hit_rate@" << k << ' ' << io::sig6(v) << '\n';
  for (const auto& [k, v] : ndcg_at) o << "ndcg@" << k << ' ' << io::sig6(v) << '\n';
  o << "diversity " << io::sig6(diversity) << '\n';
  o << "tail_coverage " << io::sig6(tail_coverage) << '\n';
  if (latency) {
    o << "latency_median_ms " << io::sig6(latency->median_ms) << '\n';
    o << "latency_p95_ms " << io::sig6(latency->p95_ms) << '\n';
    o << "latency_mean_ms " << io::sig6(latency->mean_ms) << '\n';
  }
  o << "users_evaluated " << users_evaluated << '\n';
  o << "users_skipped " << users_skipped << '\n';
  return o.str();
}

std::string MetricReport::to_table() const {
  std::vector<std::pair<std::string, std::string>> rows;
  std::istringstream in(to_kv());
  std::string k, v;
  while (in >> k >> v) rows.emplace_back(k, v);
  std::size_t w = 6;
  for (const auto& r : rows) w = std::max(w, r.first.size());
  std::ostringstream o;
  o << std::left << std::setw(static_cast<int>(w)) << "metric" << "  value\n";
  for (const auto& [key, val] : rows) o << std::left << std::setw(static_cast<int>(w)) << key << "  " << val << '\n';
  return o.str();
}

ItemSet relevant_items(const SplitDataset& split, const std::string& user_id, bool purchase_only) {
  ItemSet train_items;
  for (const auto& r : split.train.sequence(user_id)) train_items.insert(r.item_id);
  ItemSet rel;
  for (const auto& r : split.test.sequence(user_id)) {
    if (purchase_only && r.action != Action::Purchase) continue;
    if (!train_items.count(r.item_id)) rel.insert(r.item_id);
  }
  return rel;
}

namespace {

struct Accumulator {
  std::map<std::size_t, double> recall, hit, ndcg;
  std::vector<std::vector<std::string>> div_lists, tail_lists;
  std::size_t evaluated = 0, skipped = 0;
};

std::vector<std::string> checked_ids(const RecommendationList& list, const std::vector<bool>& history,
                                     const Catalog& catalog) {
  std::vector<std::string> ids;
  ids.reserve(list.items.size());
  for (const auto& it : list.items) {
    if (history[catalog.index_of(it.item_id)])
      throw Error("recommendation for " + list.user_id + " contains training item " + it.item_id);
    ids.push_back(it.item_id);
  }
  return ids;
}

MetricReport finish(Accumulator& acc, const SplitDataset& split, const EvalConfig& config) {
  MetricReport r;
  r.users_evaluated = acc.evaluated;
  r.users_skipped = acc.skipped;
  if (acc.evaluated == 0) throw DataError("no test user has a nonempty relevant set");
  const double n = static_cast<double>(acc.evaluated);
  for (auto k : config.ks) {
    r.recall_at[k] = acc.recall[k] / n;
    r.hit_rate_at[k] = acc.hit[k] / n;
    r.ndcg_at[k] = acc.ndcg[k] / n;
  }
  r.diversity = acc.div_lists.size() >= 2 ? diversity(acc.div_lists, config.diversity_pairs, config.seed) : 0.0;
  r.tail_coverage = tail_coverage(acc.tail_lists, split.train, config.tail_distinct);
  return r;
}

}  // namespace

MetricReport evaluate_recommender(const Recommender& rec, const SplitDataset& split, const EvalConfig& config) {
  return evaluate_weightings(rec, split, {rec.weights()}, config).front();
}

std::vector<MetricReport> evaluate_weightings(const Recommender& rec, const SplitDataset& split,
                                              const std::vector<FusionWeights>& weights,
                                              const EvalConfig& config) {
  config.validate();
  for (const auto& w : weights) w.validate();
  std::vector<Accumulator> acc(weights.size());
  for (const auto& uid : split.test.users()) {
    const ItemSet rel = split.train.has_user(uid) ? relevant_items(split, uid, config.purchase_only) : ItemSet{};
    if (rel.empty()) {
      for (auto& a : acc) ++a.skipped;
      continue;
    }
    // Every list is a separate request of its own size, so its candidate set
    // (and normalization) matches what serving would produce.
    const UserState s = rec.prepare(uid);
    std::map<std::size_t, CandidateScores> by_depth;
    auto candidates = [&](std::size_t k) -> const CandidateScores& {
      const std::size_t depth = std::max(rec.k_each(), k);
      auto it = by_depth.find(depth);
      if (it == by_depth.end()) it = by_depth.emplace(depth, rec.candidates_for(s, k)).first;
      return it->second;
    };
    for (std::size_t i = 0; i < weights.size(); ++i) {
      auto list = [&](std::size_t k) {
        return checked_ids(rec.rank(s, candidates(k), weights[i], k), s.excluded, rec.catalog());
      };
      Accumulator& a = acc[i];
      for (auto k : config.ks) {
        const auto ids = list(k);
        a.recall[k] += recall_at_k(ids, rel, k);
        a.hit[k] += hit_rate_at_k(ids, rel, k);
        a.ndcg[k] += ndcg_at_k(ids, rel, k);
      }
      a.div_lists.push_back(list(config.diversity_k));
      a.tail_lists.push_back(list(config.tail_k));
      ++a.evaluated;
    }
  }
  std::vector<MetricReport> out;
  for (auto& a : acc) out.push_back(finish(a, split, config));
  return out;
}

std::vector<ExperimentResult> run_experiment(const SplitDataset& split,
                                             std::shared_ptr<const EmbeddingMatrix> embeddings,
                                             const std::vector<ExperimentConfig>& configs,
                                             const EvalConfig& eval) {
  eval.validate();
  std::vector<ExperimentResult> out(configs.size());
  if (configs.empty()) return out;
  for (const auto& c : configs) c.pipeline.validate();

  // Configurations that differ only in fusion weights share one training run
  // and one candidate set per user.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& p = configs[i].pipeline;
    groups[p.component_key() + '|' + std::to_string(static_cast<int>(p.normalization)) + '|' +
           std::to_string(p.k_each)]
        .push_back(i);
  }
  std::map<std::string, std::shared_ptr<const TrainedComponents>> trained;
  for (const auto& [key, members] : groups) {
    const PipelineConfig& base = configs[members.front()].pipeline;
    auto& comps = trained[base.component_key()];
    if (!comps) comps = std::make_shared<const TrainedComponents>(train_components(split.train, embeddings, base));
    const Recommender rec(comps, base.weights, base.normalization, base.k_each, base.history_length);
    std::vector<FusionWeights> ws;
    for (auto i : members) ws.push_back(configs[i].pipeline.weights);
    auto reports = evaluate_weightings(rec, split, ws, eval);
    for (std::size_t m = 0; m < members.size(); ++m)
      out[members[m]] = {configs[members[m]].name, std::move(reports[m])};
  }
  return out;
}

std::string comparison_table(const std::vector<ExperimentResult>& results) {
  if (results.empty()) return "";
  std::vector<std::string> keys;
  std::vector<std::map<std::string, std::string>> cols;
  for (const auto& r : results) {
    std::map<std::string, std::string> col;
    std::istringstream in(r.report.to_kv());
    std::string k, v;
    while (in >> k >> v) {
      if (cols.empty()) keys.push_back(k);
      col[k] = v;
    }
    cols.push_back(std::move(col));
  }
  std::size_t kw = 6;
  for (const auto& k : keys) kw = std::max(kw, k.size());
  std::vector<std::size_t> cw;
  for (std::size_t c = 0; c < results.size(); ++c) {
    std::size_t w = results[c].name.size();
    for (const auto& [k, v] : cols[c]) w = std::max(w, v.size());
    cw.push_back(w);
  }
  std::ostringstream o;
  o << std::left << std::setw(static_cast<int>(kw)) << "metric";
  for (std::size_t c = 0; c < results.size(); ++c)
    o << "  " << std::right << std::setw(static_cast<int>(cw[c])) << results[c].name;
  o << '\n';
  for (const auto& k : keys) {
    o << std::left << std::setw(static_cast<int>(kw)) << k;
    for (std::size_t c = 0; c < results.size(); ++c) {
      auto it = cols[c].find(k);
      o << "  " << std::right << std::setw(static_cast<int>(cw[c])) << (it == cols[c].end() ? "-" : it->second);
    }
    o << '\n';
  }
  return o.str();
}

}  // namespace ltrec
