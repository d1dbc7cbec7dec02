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

#include "ltrec/generative_scorer.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ltrec/errors.hpp"
#include "ltrec/io.hpp"

namespace ltrec {

MarkovModel::MarkovModel(std::vector<std::string> vocab, int order, double smoothing_alpha)
    : order_(order), alpha_(smoothing_alpha), vocab_(std::move(vocab)) {
  if (order_ < 1) throw ConfigError("Markov order must be >= 1");
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw ConfigError("smoothing alpha must be > 0");
  if (vocab_.empty()) throw DataError("Markov model needs a nonempty vocabulary");
  for (std::size_t i = 0; i < vocab_.size(); ++i)
    if (!index_.emplace(vocab_[i], i).second) throw DataError("duplicate vocabulary item " + vocab_[i]);
  unigram_.assign(vocab_.size(), 0.0);
}

std::optional<std::size_t> MarkovModel::index(const std::string& item_id) const {
  auto it = index_.find(item_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void MarkovModel::observe_sequence(std::span<const std::size_t> seq) {
  for (std::size_t p = 0; p < seq.size(); ++p) {
    if (seq[p] >= vocab_.size()) throw DataError("sequence item outside vocabulary");
    unigram_[seq[p]] += 1.0;
    total_ += 1.0;
    for (std::size_t n = 1; n <= static_cast<std::size_t>(order_) && n <= p; ++n) {
      Node& node = counts_[Context(seq.begin() + static_cast<std::ptrdiff_t>(p - n),
                                   seq.begin() + static_cast<std::ptrdiff_t>(p))];
      node.total += 1.0;
      node.next[seq[p]] += 1.0;
    }
  }
}

Context MarkovModel::context_of(std::span<const std::size_t> history) const {
  const std::size_t n = std::min(history.size(), static_cast<std::size_t>(order_));
  return Context(history.end() - static_cast<std::ptrdiff_t>(n), history.end());
}

Context MarkovModel::context_of(const UserHistory& history) const {
  std::vector<std::size_t> rows;
  rows.reserve(history.items.size());
  for (const auto& id : history.items) {
    auto i = index(id);
    if (!i) throw DataError("history item " + id + " outside the model vocabulary");
    rows.push_back(*i);
  }
  return context_of(rows);
}

double MarkovModel::base_probability(const Context& ctx, std::size_t item) const {
  const double V = static_cast<double>(vocab_.size());
  double p = (unigram_[item] + alpha_ / V) / (total_ + alpha_);
  for (std::size_t n = 1; n <= ctx.size(); ++n) {
    auto it = counts_.find(Context(ctx.end() - static_cast<std::ptrdiff_t>(n), ctx.end()));
    if (it == counts_.end()) continue;
    const Node& node = it->second;
    auto c = node.next.find(item);
    const double cnt = c == node.next.end() ? 0.0 : c->second;
    p = (cnt + alpha_ * p) / (node.total + alpha_);
  }
  return p;
}

std::vector<double> MarkovModel::base_distribution(const Context& ctx) const {
  const double V = static_cast<double>(vocab_.size());
  std::vector<double> p(vocab_.size());
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = (unigram_[j] + alpha_ / V) / (total_ + alpha_);
  for (std::size_t n = 1; n <= ctx.size(); ++n) {
    auto it = counts_.find(Context(ctx.end() - static_cast<std::ptrdiff_t>(n), ctx.end()));
    if (it == counts_.end()) continue;
    const Node& node = it->second;
    auto c = node.next.begin();
    for (std::size_t j = 0; j < p.size(); ++j) {
      double cnt = 0.0;
      if (c != node.next.end() && c->first == j) {
        cnt = c->second;
        ++c;
      }
      p[j] = (cnt + alpha_ * p[j]) / (node.total + alpha_);
    }
  }
  return p;
}

double MarkovModel::normalizer(const Context& ctx) const {
  auto it = adjust_.find(ctx);
  if (it == adjust_.end()) return 1.0;
  double z = 1.0;
  for (const auto& [j, theta] : it->second) z += base_probability(ctx, j) * std::expm1(theta);
  return z;
}

std::vector<double> MarkovModel::distribution(const Context& ctx) const {
  std::vector<double> p = base_distribution(ctx);
  auto it = adjust_.find(ctx);
  if (it == adjust_.end()) return p;
  double z = 1.0;
  for (const auto& [j, theta] : it->second) z += p[j] * std::expm1(theta);
  for (const auto& [j, theta] : it->second) p[j] *= std::exp(theta);
  for (double& x : p) x /= z;
  return p;
}

double MarkovModel::probability(const Context& ctx, std::size_t item) const {
  if (item >= vocab_.size()) throw DataError("item index outside vocabulary");
  return base_probability(ctx, item) * std::exp(adjustment(ctx, item)) / normalizer(ctx);
}

double MarkovModel::log_prob(const Context& ctx, std::size_t item) const {
  return std::log(probability(ctx, item));
}

double MarkovModel::adjustment(const Context& ctx, std::size_t item) const {
  auto it = adjust_.find(ctx);
  if (it == adjust_.end()) return 0.0;
  auto j = it->second.find(item);
  return j == it->second.end() ? 0.0 : j->second;
}

void MarkovModel::add_adjustment(const Context& ctx, std::size_t item, double delta) {
  if (item >= vocab_.size()) throw DataError("item index outside vocabulary");
  if (!std::isfinite(delta)) throw DataError("non-finite alignment adjustment");
  adjust_[ctx][item] += delta;
}

// Layout:
//   ltrec-markov 1 <order> <alpha> <vocab size>
//   U <item> <count>                      unigram counts
//   N <n> <ctx_1> .. <ctx_n> <item> <count>
//   A <n> <ctx_1> .. <ctx_n> <item> <theta>   alignment log-weights
void MarkovModel::save(const std::filesystem::path& path) const {
  std::string out = "ltrec-markov 1 " + std::to_string(order_) + " " + io::exact(alpha_) + " " +
                    std::to_string(vocab_.size()) + "\n";
  for (std::size_t j = 0; j < vocab_.size(); ++j)
    if (unigram_[j] != 0.0) out += "U " + vocab_[j] + " " + io::exact(unigram_[j]) + "\n";
  auto ctx_str = [&](const Context& c) {
    std::string s = std::to_string(c.size());
    for (auto i : c) s += " " + vocab_[i];
    return s;
  };
  for (const auto& [ctx, node] : counts_)
    for (const auto& [j, c] : node.next)
      out += "N " + ctx_str(ctx) + " " + vocab_[j] + " " + io::exact(c) + "\n";
  for (const auto& [ctx, m] : adjust_)
    for (const auto& [j, theta] : m)
      out += "A " + ctx_str(ctx) + " " + vocab_[j] + " " + io::exact(theta) + "\n";
  io::write_file(path, out);
}

MarkovModel MarkovModel::load(const std::filesystem::path& path, std::vector<std::string> vocab) {
  const auto lines = io::read_lines(path);
  const std::string where = path.string();
  if (lines.empty()) throw DataError(where + ": empty Markov model file");
  const auto head = io::split_ws(lines[0]);
  if (head.size() != 5 || head[0] != "ltrec-markov") throw DataError(where + ": bad Markov header");
  const auto V = static_cast<std::size_t>(io::parse_int(head[4], "vocabulary size"));
  if (V != vocab.size())
    throw DataError(where + ": vocabulary size " + std::to_string(V) + " does not match catalog size " +
                    std::to_string(vocab.size()));
  MarkovModel m(std::move(vocab), static_cast<int>(io::parse_int(head[2], "order")),
                io::parse_double(head[3], "alpha"));
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto t = io::split_ws(lines[ln]);
    const std::string at = where + ":" + std::to_string(ln + 1);
    auto item = [&](const std::string& id) {
      auto i = m.index(id);
      if (!i) throw DataError(at + ": unknown item " + id);
      return *i;
    };
    if (t[0] == "U" && t.size() == 3) {
      const double c = io::parse_double(t[2], "count");
      m.unigram_[item(t[1])] = c;
      m.total_ += c;
      continue;
    }
    if ((t[0] == "N" || t[0] == "A") && t.size() >= 2) {
      const auto n = static_cast<std::size_t>(io::parse_int(t[1], "context length"));
      if (t.size() != n + 4) throw DataError(at + ": context length mismatch");
      Context ctx;
      for (std::size_t k = 0; k < n; ++k) ctx.push_back(item(t[2 + k]));
      const std::size_t j = item(t[2 + n]);
      const double v = io::parse_double(t[3 + n], t[0] == "N" ? "count" : "theta");
      if (t[0] == "N") {
        if (n < 1 || n > static_cast<std::size_t>(m.order_)) throw DataError(at + ": bad context length");
        Node& node = m.counts_[ctx];
        node.total += v;
        node.next[j] = v;
      } else {
        m.adjust_[ctx][j] = v;
      }
      continue;
    }
    throw DataError(at + ": unrecognized record");
  }
  return m;
}

// ---------------------------------------------------------------------------

Dataset filter_training_sequences(const Dataset& d, std::size_t min_length,
                                  std::optional<Action> required_action) {
  if (min_length < 1) throw ConfigError("min_length must be >= 1");
  std::vector<InteractionRecord> kept;
  for (std::size_t u = 0; u < d.users().size(); ++u) {
    const auto seq = d.sequence(u);
    if (seq.size() < min_length) continue;
    if (required_action &&
        std::none_of(seq.begin(), seq.end(),
                     [&](const InteractionRecord& r) { return r.action == *required_action; }))
      continue;
    kept.insert(kept.end(), seq.begin(), seq.end());
  }
  return Dataset(d.catalog_ptr(), std::move(kept));
}

MarkovModel fit_markov(const Dataset& train, int order, double smoothing_alpha) {
  std::vector<std::string> vocab;
  vocab.reserve(train.catalog().size());
  for (const auto& it : train.catalog().items()) vocab.push_back(it.item_id);
  MarkovModel m(std::move(vocab), order, smoothing_alpha);
  if (train.interactions().empty()) throw DataError("cannot fit a sequence model on no sequences");
  std::vector<std::size_t> seq;
  for (std::size_t u = 0; u < train.users().size(); ++u) {
    seq.clear();
    for (const auto& r : train.sequence(u)) seq.push_back(train.catalog().index_of(r.item_id));
    m.observe_sequence(seq);
  }
  return m;
}

double gen_log_prob(const MarkovModel& model, const UserHistory& history, const std::string& item) {
  auto j = model.index(item);
  if (!j) throw DataError("unknown item " + item);
  return model.log_prob(model.context_of(history), *j);
}

std::vector<std::pair<std::size_t, double>> beam_search_rows(
    const MarkovModel& model, std::span<const std::size_t> history, std::size_t width,
    const std::vector<bool>& excluded, std::size_t depth) {
  if (width < 1) throw ConfigError("beam width must be >= 1");
  if (depth < 1) throw ConfigError("beam depth must be >= 1");
  const std::size_t V = model.vocab_size();
  auto allowed = [&](std::size_t j) { return j >= excluded.size() || !excluded[j]; };
  bool any = false;
  for (std::size_t j = 0; j < V && !any; ++j) any = allowed(j);
  if (!any) throw DataError("beam search: every vocabulary item is excluded");

  struct Beam {
    std::vector<std::size_t> seq;
    double score;
  };
  const auto& ids = model.vocab();
  auto better = [&](const Beam& a, const Beam& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::lexicographical_compare(
        a.seq.begin(), a.seq.end(), b.seq.begin(), b.seq.end(),
        [&](std::size_t x, std::size_t y) { return ids[x] < ids[y]; });
  };

  std::vector<Beam> beams{{{}, 0.0}};
  std::vector<std::size_t> ctx_buf(history.begin(), history.end());
  for (std::size_t step = 0; step < depth; ++step) {
    std::vector<Beam> next;
    for (const auto& b : beams) {
      ctx_buf.resize(history.size());
      ctx_buf.insert(ctx_buf.end(), b.seq.begin(), b.seq.end());
      const auto p = model.distribution(model.context_of(ctx_buf));
      for (std::size_t j = 0; j < V; ++j) {
        if (!allowed(j)) continue;
        Beam nb{b.seq, b.score + std::log(p[j])};
        nb.seq.push_back(j);
        next.push_back(std::move(nb));
      }
    }
    const std::size_t keep = std::min(width, next.size());
    std::partial_sort(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(keep), next.end(), better);
    next.resize(keep);
    beams = std::move(next);
  }

  std::vector<std::pair<std::size_t, double>> out;
  std::unordered_set<std::size_t> seen;
  for (const auto& b : beams)
    if (seen.insert(b.seq.front()).second) out.emplace_back(b.seq.front(), b.score);
  return out;
}

BeamCandidateSet beam_search(const MarkovModel& model, const UserHistory& history,
                             std::size_t width, const ItemSet& exclude, std::size_t depth) {
  std::vector<std::size_t> rows;
  for (const auto& id : history.items) {
    auto i = model.index(id);
    if (!i) throw DataError("history item " + id + " outside the model vocabulary");
    rows.push_back(*i);
  }
  std::vector<bool> mask(model.vocab_size(), false);
  for (const auto& id : exclude)
    if (auto i = model.index(id)) mask[*i] = true;
  BeamCandidateSet out{history.user_id, {}, width};
  for (const auto& [j, lp] : beam_search_rows(model, rows, width, mask, depth))
    out.candidates.push_back({model.vocab()[j], lp});
  return out;
}

}  // namespace ltrec
