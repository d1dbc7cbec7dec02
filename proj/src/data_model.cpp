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

#include "ltrec/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ltrec/errors.hpp"
#include "ltrec/io.hpp"
#include "ltrec/rng.hpp"

namespace ltrec {

using json = nlohmann::ordered_json;

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Click: return "click";
    case Action::AddToCart: return "cart";
    case Action::Purchase: return "purchase";
  }
  return "click";
}

Action parse_action(std::string_view s) {
  if (s == "click") return Action::Click;
  if (s == "cart") return Action::AddToCart;
  if (s == "purchase") return Action::Purchase;
  throw DataError("unknown action '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Catalog / Dataset

Catalog::Catalog(std::vector<ItemRecord> items) : items_(std::move(items)) {
  index_.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& it = items_[i];
    if (it.item_id.empty()) throw DataError("catalog item with empty item_id");
    if (it.sales_volume < 0)
      throw DataError("negative sales_volume for item " + it.item_id);
    if (!index_.emplace(it.item_id, i).second)
      throw DataError("duplicate item_id in catalog: " + it.item_id);
  }
}

std::optional<std::size_t> Catalog::find(std::string_view item_id) const {
  auto it = index_.find(std::string(item_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Catalog::index_of(std::string_view item_id) const {
  auto pos = find(item_id);
  if (!pos) throw DataError("unknown item_id: " + std::string(item_id));
  return *pos;
}

Dataset::Dataset(std::vector<ItemRecord> items,
                 std::vector<InteractionRecord> interactions)
    : Dataset(std::make_shared<const Catalog>(std::move(items)),
              std::move(interactions)) {}

Dataset::Dataset(std::shared_ptr<const Catalog> catalog,
                 std::vector<InteractionRecord> interactions)
    : catalog_(std::move(catalog)), interactions_(std::move(interactions)) {
  for (const auto& r : interactions_) {
    if (!catalog_->find(r.item_id))
      throw DataError("interaction references unknown item_id: " + r.item_id +
                      " (user " + r.user_id + ")");
    if (r.user_id.empty()) throw DataError("interaction with empty user_id");
  }
  std::stable_sort(interactions_.begin(), interactions_.end(),
                   [](const InteractionRecord& a, const InteractionRecord& b) {
                     if (a.user_id != b.user_id) return a.user_id < b.user_id;
                     return a.timestamp < b.timestamp;
                   });
  for (std::size_t i = 0; i < interactions_.size(); ++i) {
    if (i == 0 || interactions_[i].user_id != interactions_[i - 1].user_id) {
      user_index_.emplace(interactions_[i].user_id, users_.size());
      users_.push_back(interactions_[i].user_id);
      user_begin_.push_back(i);
    }
  }
  user_begin_.push_back(interactions_.size());
}

bool Dataset::has_user(std::string_view user_id) const {
  return user_index_.count(std::string(user_id)) > 0;
}

std::span<const InteractionRecord> Dataset::sequence(std::string_view user_id) const {
  auto it = user_index_.find(std::string(user_id));
  if (it == user_index_.end()) return {};
  return sequence(it->second);
}

std::span<const InteractionRecord> Dataset::sequence(std::size_t user_pos) const {
  return std::span<const InteractionRecord>(interactions_)
      .subspan(user_begin_[user_pos], user_begin_[user_pos + 1] - user_begin_[user_pos]);
}

// ---------------------------------------------------------------------------
// File formats: one JSON object per line.

namespace {

template <class T>
T field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(where + ": missing key '" + key + "'");
  try {
    return it->template get<T>();
  } catch (const json::exception&) {
    throw DataError(where + ": wrong type for key '" + key + "'");
  }
}

json parse_line(const std::string& line, const std::string& where) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw DataError(where + ": expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw DataError(where + ": malformed record (" + e.what() + ")");
  }
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& catalog_path,
                     const std::filesystem::path& interactions_path) {
  std::vector<ItemRecord> items;
  {
    const auto lines = io::read_lines(catalog_path);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      if (blank(lines[n])) continue;
      const std::string where = catalog_path.string() + ":" + std::to_string(n + 1);
      const json j = parse_line(lines[n], where);
      ItemRecord r;
      r.item_id = field<std::string>(j, "item_id", where);
      r.title = field<std::string>(j, "title", where);
      r.description = field<std::string>(j, "description", where);
      r.review_summary = field<std::string>(j, "review_summary", where);
      r.sales_volume = field<std::int64_t>(j, "sales_volume", where);
      if (r.sales_volume < 0) throw DataError(where + ": negative sales_volume");
      r.tokens = io::split_ws(field<std::string>(j, "tokens", where));
      if (auto t = j.find("tail_flag"); t != j.end()) {
        const auto s = t->get<std::string>();
        if (s == "head") r.tail_flag = TailFlag::Head;
        else if (s == "tail") r.tail_flag = TailFlag::Tail;
        else throw DataError(where + ": bad tail_flag '" + s + "'");
      }
      items.push_back(std::move(r));
    }
  }
  auto catalog = std::make_shared<const Catalog>(std::move(items));

  std::vector<InteractionRecord> inter;
  const auto lines = io::read_lines(interactions_path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (blank(lines[n])) continue;
    const std::string where = interactions_path.string() + ":" + std::to_string(n + 1);
    const json j = parse_line(lines[n], where);
    InteractionRecord r;
    r.user_id = field<std::string>(j, "user_id", where);
    r.item_id = field<std::string>(j, "item_id", where);
    try {
      r.action = parse_action(field<std::string>(j, "action", where));
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    r.timestamp = field<std::int64_t>(j, "timestamp", where);
    if (!catalog->find(r.item_id))
      throw DataError(where + ": dangling item_id " + r.item_id);
    inter.push_back(std::move(r));
  }
  return Dataset(std::move(catalog), std::move(inter));
}

void save_catalog(const Dataset& d, const std::filesystem::path& path) {
  std::string out;
  for (const auto& it : d.catalog().items()) {
    json j;
    j["item_id"] = it.item_id;
    j["title"] = it.title;
    j["description"] = it.description;
    j["review_summary"] = it.review_summary;
    j["sales_volume"] = it.sales_volume;
    j["tokens"] = join_tokens(it.tokens);
    if (it.tail_flag) j["tail_flag"] = *it.tail_flag == TailFlag::Head ? "head" : "tail";
    out += j.dump();
    out += '\n';
  }
  io::write_file(path, out);
}

void save_interactions(const Dataset& d, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : d.interactions()) {
    json j;
    j["user_id"] = r.user_id;
    j["item_id"] = r.item_id;
    j["action"] = action_name(r.action);
    j["timestamp"] = r.timestamp;
    out += j.dump();
    out += '\n';
  }
  io::write_file(path, out);
}

// ---------------------------------------------------------------------------

Dataset recompute_sales_from_purchases(const Dataset& d) {
  std::vector<ItemRecord> items = d.catalog().items();
  for (auto& it : items) it.sales_volume = 0;
  for (const auto& r : d.interactions())
    if (r.action == Action::Purchase) ++items[d.catalog().index_of(r.item_id)].sales_volume;
  return Dataset(std::move(items), d.interactions());
}

std::size_t head_count(std::size_t n, double head_fraction) {
  const auto f = static_cast<std::size_t>(std::floor(head_fraction * static_cast<double>(n) + 1e-9));
  return std::min(n, std::max<std::size_t>(1, f));
}

Dataset classify_head_tail(const Dataset& d, double head_fraction) {
  if (!(head_fraction > 0.0 && head_fraction < 1.0))
    throw ConfigError("head_fraction must lie in (0,1)");
  const std::size_t n = d.catalog().size();
  if (n == 0) throw DataError("cannot classify an empty catalog");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto& items = d.catalog().items();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (items[a].sales_volume != items[b].sales_volume)
      return items[a].sales_volume > items[b].sales_volume;
    return items[a].item_id < items[b].item_id;
  });

  std::vector<ItemRecord> out = items;
  for (auto& it : out) it.tail_flag = TailFlag::Tail;
  const std::size_t heads = head_count(n, head_fraction);
  for (std::size_t r = 0; r < heads; ++r) out[order[r]].tail_flag = TailFlag::Head;
  return Dataset(std::move(out), d.interactions());
}

std::size_t holdout_count(std::size_t n, double holdout_fraction) {
  if (n <= 1) return 0;
  // The epsilon keeps products like 0.1 * 30 from rounding up past 3.
  const auto c = static_cast<std::size_t>(
      std::ceil(holdout_fraction * static_cast<double>(n) - 1e-9));
  return std::min(c, n - 1);
}

SplitDataset chronological_split(const Dataset& d, double holdout_fraction) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw ConfigError("holdout_fraction must lie in (0,1)");
  std::vector<InteractionRecord> train, test;
  for (std::size_t u = 0; u < d.users().size(); ++u) {
    const auto seq = d.sequence(u);
    const std::size_t n_test = holdout_count(seq.size(), holdout_fraction);
    const std::size_t cut = seq.size() - n_test;
    train.insert(train.end(), seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(cut));
    test.insert(test.end(), seq.begin() + static_cast<std::ptrdiff_t>(cut), seq.end());
  }
  return SplitDataset{Dataset(d.catalog_ptr(), std::move(train)),
                      Dataset(d.catalog_ptr(), std::move(test)), holdout_fraction};
}

// ---------------------------------------------------------------------------
// Synthetic generator
//
// 1. Item popularity: a seeded random permutation assigns Zipf ranks; item
//    weight = 1 / (rank + 1)^s.
// 2. Each item gets a cluster, a token stream (cluster words, global words,
//    one item-unique word) and a few successor items drawn from its cluster
//    by popularity.
// 3. Each user prefers one or two clusters. Every user gets one interaction,
//    the remainder is spread uniformly over users.
// 4. Each event picks the next item as: a successor of the previous item
//    (p_successor), a popularity draw inside a preferred cluster (p_cluster),
//    or a global popularity draw.
// 5. Actions are click/cart/purchase with probability 0.7/0.2/0.1; timestamps
//    advance by 1..3600 s per event. sales_volume = purchase count.

namespace {

std::string padded(char prefix, std::size_t value, std::size_t width) {
  std::string s = std::to_string(value);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return prefix + s;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_users < 1 || spec.n_items < 1 || spec.n_interactions < 1)
    throw ConfigError("synthetic counts must be >= 1");
  if (!(spec.zipf_exponent > 0.0)) throw ConfigError("zipf_exponent must be > 0");
  if (spec.n_interactions < spec.n_users)
    throw ConfigError("n_interactions < n_users: cannot give every user an interaction");
  if (spec.n_clusters < 1) throw ConfigError("n_clusters must be >= 1");

  Rng rng(spec.seed);
  const std::size_t n_items = spec.n_items;
  const std::size_t n_clusters = std::min(spec.n_clusters, n_items);
  const std::size_t item_width = std::to_string(n_items).size();
  const std::size_t user_width = std::to_string(spec.n_users).size();

  std::vector<std::size_t> rank(n_items);
  std::iota(rank.begin(), rank.end(), 0);
  rng.shuffle(rank);
  std::vector<double> weight(n_items);
  for (std::size_t i = 0; i < n_items; ++i)
    weight[i] = 1.0 / std::pow(static_cast<double>(rank[i] + 1), spec.zipf_exponent);

  // Round-robin over a shuffled order keeps every cluster nonempty.
  std::vector<std::size_t> cluster(n_items);
  {
    std::vector<std::size_t> perm(n_items);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    for (std::size_t k = 0; k < n_items; ++k) cluster[perm[k]] = k % n_clusters;
  }
  std::vector<std::vector<std::size_t>> members(n_clusters);
  for (std::size_t i = 0; i < n_items; ++i) members[cluster[i]].push_back(i);
  std::vector<DiscreteSampler> cluster_sampler;
  for (const auto& m : members) {
    std::vector<double> w;
    for (auto i : m) w.push_back(weight[i]);
    cluster_sampler.emplace_back(w);
  }
  const DiscreteSampler global_sampler(weight);

  std::vector<ItemRecord> items(n_items);
  std::vector<std::vector<std::size_t>> successors(n_items);
  // taste_items[c][w]: items of cluster c carrying cluster word w.
  std::vector<std::vector<std::vector<std::size_t>>> taste_items(
      n_clusters, std::vector<std::vector<std::size_t>>(spec.cluster_vocab));
  for (std::size_t i = 0; i < n_items; ++i) {
    auto& it = items[i];
    it.item_id = padded('I', i + 1, item_width);
    const std::size_t c = cluster[i];
    it.tokens.push_back("cat" + std::to_string(c));
    for (int t = 0; t < 5; ++t) {
      const std::size_t w = rng.below(spec.cluster_vocab);
      it.tokens.push_back("c" + std::to_string(c) + "w" + std::to_string(w));
      auto& bucket = taste_items[c][w];
      if (bucket.empty() || bucket.back() != i) bucket.push_back(i);
    }
    for (int t = 0; t < 2; ++t)
      it.tokens.push_back("g" + std::to_string(rng.below(spec.global_vocab)));
    it.tokens.push_back("sku" + std::to_string(i + 1));
    it.title = "Item " + it.item_id;
    it.description = join_tokens(it.tokens);
    it.review_summary = "cluster " + std::to_string(c) + " product";

    const auto& m = members[c];
    for (std::size_t s = 0; s < spec.successors_per_item && m.size() > 1; ++s) {
      std::size_t pick = i;
      for (int attempt = 0; attempt < 16 && pick == i; ++attempt)
        pick = m[cluster_sampler[c].sample(rng)];
      if (pick != i) successors[i].push_back(pick);
    }
  }

  std::vector<std::vector<DiscreteSampler>> taste_sampler(n_clusters);
  for (std::size_t c = 0; c < n_clusters; ++c)
    for (const auto& bucket : taste_items[c]) {
      std::vector<double> w;
      for (auto i : bucket) w.push_back(weight[i]);
      taste_sampler[c].emplace_back(w);
    }

  std::vector<std::size_t> per_user(spec.n_users, 1);
  for (std::size_t r = spec.n_users; r < spec.n_interactions; ++r)
    ++per_user[rng.below(spec.n_users)];

  std::vector<InteractionRecord> inter;
  inter.reserve(spec.n_interactions);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    const std::string uid = padded('U', u + 1, user_width);
    std::vector<std::size_t> prefs{rng.below(n_clusters)};
    if (n_clusters > 1 && rng.below(2) == 1) {
      std::size_t second = rng.below(n_clusters - 1);
      if (second >= prefs[0]) ++second;
      prefs.push_back(second);
    }
    std::vector<std::vector<std::size_t>> taste(prefs.size());
    for (std::size_t p = 0; p < prefs.size(); ++p)
      for (std::size_t t = 0; t < spec.taste_words; ++t) {
        const std::size_t w = rng.below(spec.cluster_vocab);
        if (!taste_items[prefs[p]][w].empty()) taste[p].push_back(w);
      }
    std::int64_t ts = 1'700'000'000 + static_cast<std::int64_t>(rng.below(86'400));
    std::optional<std::size_t> prev;
    for (std::size_t e = 0; e < per_user[u]; ++e) {
      const double r = rng.uniform();
      std::size_t item;
      if (prev && !successors[*prev].empty() && r < spec.p_successor) {
        const auto& s = successors[*prev];
        item = s[rng.below(s.size())];
      } else if (r < spec.p_successor + spec.p_cluster) {
        const std::size_t p = rng.below(prefs.size());
        const std::size_t c = prefs[p];
        if (!taste[p].empty() && rng.uniform() < spec.p_taste) {
          const std::size_t w = taste[p][rng.below(taste[p].size())];
          item = taste_items[c][w][taste_sampler[c][w].sample(rng)];
        } else {
          item = members[c][cluster_sampler[c].sample(rng)];
        }
      } else {
        item = global_sampler.sample(rng);
      }
      const double a = rng.uniform();
      const Action action = a < 0.7 ? Action::Click : (a < 0.9 ? Action::AddToCart : Action::Purchase);
      ts += 1 + static_cast<std::int64_t>(rng.below(3600));
      if (action == Action::Purchase) ++items[item].sales_volume;
      inter.push_back({uid, items[item].item_id, action, ts});
      prev = item;
    }
  }
  return Dataset(std::move(items), std::move(inter));
}

// ---------------------------------------------------------------------------

DiscreteSampler::DiscreteSampler(const std::vector<double>& weights) {
  cumulative_.reserve(weights.size());
  double acc = 0.0;
  for (double w : weights) {
    acc += w;
    cumulative_.push_back(acc);
  }
}

std::size_t DiscreteSampler::sample(Rng& rng) const {
  const double x = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
  if (it == cumulative_.end()) --it;
  return static_cast<std::size_t>(it - cumulative_.begin());
}

}  // namespace ltrec
