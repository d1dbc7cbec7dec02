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

#include "ltrec/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "ltrec/errors.hpp"
#include "ltrec/io.hpp"
#include "ltrec/rng.hpp"

namespace ltrec {

using json = nlohmann::ordered_json;

FeedbackTable::FeedbackTable(const Dataset& heldout) {
  const double n_users = static_cast<double>(heldout.users().size());
  std::unordered_map<std::string, std::pair<double, double>> counts;  // users, purchasers
  for (std::size_t u = 0; u < heldout.users().size(); ++u) {
    std::unordered_set<std::string> touched, bought;
    for (const auto& r : heldout.sequence(u)) {
      touched.insert(r.item_id);
      if (r.action == Action::Purchase) bought.insert(r.item_id);
    }
    for (const auto& i : touched) counts[i].first += 1.0;
    for (const auto& i : bought) counts[i].second += 1.0;
  }
  for (const auto& [item, c] : counts)
    rates_[item] = {c.first / n_users, c.first > 0 ? c.second / c.first : 0.0};
}

double FeedbackTable::click_rate(const std::string& item) const {
  auto it = rates_.find(item);
  return it == rates_.end() ? 0.0 : it->second.first;
}

double FeedbackTable::conversion_rate(const std::string& item) const {
  auto it = rates_.find(item);
  return it == rates_.end() ? 0.0 : it->second.second;
}

std::vector<std::size_t> label_order_from(std::span<const double> feedback,
                                          std::span<const double> log_probs,
                                          std::span<const std::string> ids) {
  std::vector<std::size_t> order(feedback.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (feedback[a] != feedback[b]) return feedback[a] > feedback[b];
    if (log_probs[a] != log_probs[b]) return log_probs[a] > log_probs[b];
    return ids[a] < ids[b];
  });
  return order;
}

CandidateRanking build_partial_order(const BeamCandidateSet& candidates,
                                     const std::vector<std::string>& context,
                                     const FeedbackTable& feedback, double ctr_weight,
                                     double cvr_weight) {
  if (candidates.candidates.empty()) throw DataError("partial order over an empty candidate set");
  if (ctr_weight < 0.0 || cvr_weight < 0.0 || (ctr_weight == 0.0 && cvr_weight == 0.0))
    throw ConfigError("feedback weights must be >= 0 and not both 0");
  CandidateRanking r;
  r.input_user = candidates.input_user;
  r.context = context;
  std::vector<double> fb, lp;
  std::vector<std::string> ids;
  for (const auto& c : candidates.candidates) {
    const double f = ctr_weight * feedback.click_rate(c.item_id) +
                     cvr_weight * feedback.conversion_rate(c.item_id);
    r.candidates.push_back({c.item_id, c.log_prob, f});
    fb.push_back(f);
    lp.push_back(c.log_prob);
    ids.push_back(c.item_id);
  }
  r.label_order = label_order_from(fb, lp, ids);
  return r;
}

CandidateRanking build_partial_order(const BeamCandidateSet& candidates, const Dataset& heldout,
                                     double ctr_weight, double cvr_weight) {
  return build_partial_order(candidates, {}, FeedbackTable(heldout), ctr_weight, cvr_weight);
}

namespace {

void check_inputs(std::span<const double> scores, std::span<const std::size_t> order) {
  if (order.size() != scores.size()) throw DataError("label order length differs from score count");
  std::vector<bool> seen(scores.size(), false);
  for (auto i : order) {
    if (i >= scores.size() || seen[i]) throw DataError("label order is not a permutation");
    seen[i] = true;
  }
  for (double s : scores)
    if (!std::isfinite(s)) throw DataError("non-finite ranking score");
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double neg_log_sigmoid(double x) {
  if (x >= 0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

}  // namespace

std::size_t count_violations(std::span<const double> scores, std::span<const std::size_t> order) {
  std::size_t v = 0;
  for (std::size_t a = 0; a < order.size(); ++a)
    for (std::size_t b = a + 1; b < order.size(); ++b)
      if (scores[order[a]] < scores[order[b]]) ++v;
  return v;
}

// loss = sum_i [ logsumexp(s_sigma(i..k)) - s_sigma(i) ]
// d/ds_sigma(j) = sum_{i <= j} softmax_i(j) - 1
RankingLossReport listmle_loss(std::span<const double> scores, std::span<const std::size_t> order) {
  if (scores.empty()) throw DataError("ListMLE needs at least one candidate");
  check_inputs(scores, order);
  const std::size_t k = scores.size();
  RankingLossReport out;
  out.gradient.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = i; j < k; ++j) mx = std::max(mx, scores[order[j]]);
    double z = 0.0;
    for (std::size_t j = i; j < k; ++j) z += std::exp(scores[order[j]] - mx);
    out.loss += mx + std::log(z) - scores[order[i]];
    for (std::size_t j = i; j < k; ++j) out.gradient[order[j]] += std::exp(scores[order[j]] - mx) / z;
    out.gradient[order[i]] -= 1.0;
  }
  out.loss = std::max(out.loss, 0.0);
  out.pairwise_violations = count_violations(scores, order);
  return out;
}

RankingLossReport ranknet_loss(std::span<const double> scores, std::span<const std::size_t> order) {
  if (scores.size() < 2) throw ConfigError("RankNet needs at least two candidates");
  check_inputs(scores, order);
  const std::size_t k = scores.size();
  const double pairs = static_cast<double>(k * (k - 1) / 2);
  RankingLossReport out;
  out.gradient.assign(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      const std::size_t hi = order[a], lo = order[b];
      const double d = scores[hi] - scores[lo];
      out.loss += neg_log_sigmoid(d);
      const double g = (sigmoid(d) - 1.0) / pairs;
      out.gradient[hi] += g;
      out.gradient[lo] -= g;
    }
  }
  out.loss /= pairs;
  out.pairwise_violations = count_violations(scores, order);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct ResolvedRanking {
  Context ctx;
  std::vector<std::size_t> items;
  std::vector<std::size_t> order;
};

ResolvedRanking resolve(const MarkovModel& model, const CandidateRanking& r) {
  ResolvedRanking out;
  std::vector<std::size_t> hist;
  for (const auto& id : r.context) {
    auto i = model.index(id);
    if (!i) throw DataError("ranking context item " + id + " outside the model vocabulary");
    hist.push_back(*i);
  }
  out.ctx = model.context_of(hist);
  for (const auto& c : r.candidates) {
    auto i = model.index(c.item_id);
    if (!i) throw DataError("ranking candidate " + c.item_id + " outside the model vocabulary");
    out.items.push_back(*i);
  }
  out.order = r.label_order;
  return out;
}

std::vector<double> scores_of(const MarkovModel& model, const ResolvedRanking& r) {
  std::vector<double> s;
  s.reserve(r.items.size());
  for (auto j : r.items) s.push_back(model.log_prob(r.ctx, j));
  return s;
}

RankingLossReport loss_of(RankingLoss kind, std::span<const double> s, std::span<const std::size_t> o) {
  return kind == RankingLoss::ListMLE ? listmle_loss(s, o) : ranknet_loss(s, o);
}

}  // namespace

std::vector<double> generation_scores(const MarkovModel& model, const CandidateRanking& r) {
  return scores_of(model, resolve(model, r));
}

MarkovModel align_generative(const MarkovModel& model, const std::vector<CandidateRanking>& rankings,
                             const AlignConfig& config, AlignReport* report) {
  config.train.validate();
  if (rankings.empty()) throw DataError("alignment needs at least one ranking");

  std::vector<ResolvedRanking> rs;
  for (const auto& r : rankings) {
    if (config.loss == RankingLoss::RankNet && r.candidates.size() < 2) continue;
    if (r.candidates.empty()) continue;
    rs.push_back(resolve(model, r));
  }
  if (rs.empty())
    throw ConfigError("RankNet alignment needs at least one ranking with two or more candidates");

  auto evaluate = [&](const MarkovModel& m, std::size_t* violations) {
    double loss = 0.0;
    std::size_t v = 0;
    for (const auto& r : rs) {
      const auto s = scores_of(m, r);
      const auto rep = loss_of(config.loss, s, r.order);
      loss += rep.loss;
      v += rep.pairwise_violations;
    }
    if (violations) *violations = v;
    return loss / static_cast<double>(rs.size());
  };

  AlignReport rep;
  for (const auto& r : rs) rep.pairs += r.items.size() * (r.items.size() - 1) / 2;
  rep.initial_loss = evaluate(model, &rep.violations_before);

  MarkovModel current = model;
  MarkovModel best = model;
  std::size_t best_violations = rep.violations_before;

  std::vector<std::size_t> order(rs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.train.seed ^ 0xa119ULL);
  const auto batch = static_cast<std::size_t>(config.train.batch_size);
  const double lr = config.train.learning_rate;

  struct Step {
    Context ctx;
    std::size_t item;
    double delta;
  };
  std::vector<Step> steps;
  for (int epoch = 1; epoch <= config.train.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      steps.clear();
      for (std::size_t n = start; n < end; ++n) {
        const auto& r = rs[order[n]];
        const auto s = scores_of(current, r);
        const auto g = loss_of(config.loss, s, r.order).gradient;
        // s_k = ln P(y_k) + theta_k - ln Z, dZ/dtheta_i / Z = pi(y_i), so
        // dL/dtheta_i = g_i - pi(y_i) * sum_k g_k.
        const double gsum = std::accumulate(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i < r.items.size(); ++i) {
          const double pi = std::exp(s[i]);
          steps.push_back({r.ctx, r.items[i], -lr * (g[i] - pi * gsum)});
        }
      }
      for (const auto& st : steps) current.add_adjustment(st.ctx, st.item, st.delta);
    }
    std::size_t v = 0;
    rep.epoch_loss.push_back(evaluate(current, &v));
    if (v <= best_violations) {
      best_violations = v;
      best = current;
      rep.selected_epoch = epoch;
    }
  }
  rep.violations_after = best_violations;
  if (report) *report = rep;
  return best;
}

// ---------------------------------------------------------------------------

void save_rankings(const std::vector<CandidateRanking>& rankings, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : rankings) {
    json j;
    j["user_id"] = r.input_user;
    j["context"] = r.context;
    json items = json::array(), fb = json::array(), lp = json::array();
    for (auto idx : r.label_order) {
      items.push_back(r.candidates[idx].item_id);
      fb.push_back(r.candidates[idx].feedback);
      lp.push_back(r.candidates[idx].log_prob);
    }
    j["items"] = items;
    j["feedback"] = fb;
    j["log_probs"] = lp;
    out += j.dump() + "\n";
  }
  io::write_file(path, out);
}

std::vector<CandidateRanking> load_rankings(const std::filesystem::path& path) {
  std::vector<CandidateRanking> out;
  const auto lines = io::read_lines(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    try {
      const json j = json::parse(lines[n]);
      CandidateRanking r;
      r.input_user = j.at("user_id").get<std::string>();
      r.context = j.at("context").get<std::vector<std::string>>();
      const auto items = j.at("items").get<std::vector<std::string>>();
      const auto fb = j.at("feedback").get<std::vector<double>>();
      const auto lp = j.at("log_probs").get<std::vector<double>>();
      if (items.size() != fb.size() || items.size() != lp.size())
        throw DataError(where + ": items, feedback and log_probs differ in length");
      for (std::size_t i = 0; i < items.size(); ++i) {
        r.candidates.push_back({items[i], lp[i], fb[i]});
        r.label_order.push_back(i);
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(where + ": malformed ranking record (" + e.what() + ")");
    }
  }
  return out;
}

}  // namespace ltrec
