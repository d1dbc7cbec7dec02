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
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ltrec {

enum class Action { Click, AddToCart, Purchase };
enum class TailFlag { Head, Tail };

/// Wire names used in the interactions file: click, cart, purchase.
std::string_view action_name(Action a);
Action parse_action(std::string_view s);

struct ItemRecord {
  std::string item_id;
  std::string title;
  std::string description;
  std::string review_summary;
  std::int64_t sales_volume = 0;
  /// Pre-tokenized text; feeds the pseudo-embedder.
  std::vector<std::string> tokens;
  /// Unset until classify_head_tail runs.
  std::optional<TailFlag> tail_flag;

  bool operator==(const ItemRecord&) const = default;
};

struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  Action action = Action::Click;
  std::int64_t timestamp = 0;

  bool operator==(const InteractionRecord&) const = default;
};

/// Item records plus an id -> position index. Shared read-only between the
/// datasets derived from one load (train/test views, filtered subsets).
class Catalog {
 public:
  explicit Catalog(std::vector<ItemRecord> items);

  const std::vector<ItemRecord>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  const ItemRecord& operator[](std::size_t i) const { return items_[i]; }
  std::optional<std::size_t> find(std::string_view item_id) const;
  std::size_t index_of(std::string_view item_id) const;  // throws DataError

  bool operator==(const Catalog& o) const { return items_ == o.items_; }

 private:
  std::vector<ItemRecord> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Immutable catalog + interaction log.
///
/// Interactions are stored grouped by user (ascending user_id) and, within a
/// user, sorted by timestamp with the original order kept for equal
/// timestamps. Every interaction references a catalog item.
class Dataset {
 public:
  Dataset() : Dataset(std::make_shared<const Catalog>(std::vector<ItemRecord>{}), {}) {}
  Dataset(std::shared_ptr<const Catalog> catalog,
          std::vector<InteractionRecord> interactions);
  Dataset(std::vector<ItemRecord> items,
          std::vector<InteractionRecord> interactions);

  const Catalog& catalog() const { return *catalog_; }
  const std::shared_ptr<const Catalog>& catalog_ptr() const { return catalog_; }
  const std::vector<InteractionRecord>& interactions() const { return interactions_; }
  /// Distinct user ids, ascending.
  const std::vector<std::string>& users() const { return users_; }

  bool has_user(std::string_view user_id) const;
  /// The user's interactions, oldest first; empty for unknown users.
  std::span<const InteractionRecord> sequence(std::string_view user_id) const;
  std::span<const InteractionRecord> sequence(std::size_t user_pos) const;

  bool operator==(const Dataset& o) const {
    return *catalog_ == *o.catalog_ && interactions_ == o.interactions_;
  }

 private:
  std::shared_ptr<const Catalog> catalog_;
  std::vector<InteractionRecord> interactions_;
  std::vector<std::string> users_;
  std::vector<std::size_t> user_begin_;  // size users_ + 1
  std::unordered_map<std::string, std::size_t> user_index_;
};

struct SplitDataset {
  Dataset train;
  Dataset test;
  double holdout_fraction = 0.2;
};

Dataset load_dataset(const std::filesystem::path& catalog_path,
                     const std::filesystem::path& interactions_path);
void save_catalog(const Dataset& d, const std::filesystem::path& path);
void save_interactions(const Dataset& d, const std::filesystem::path& path);

/// Replaces every item's sales_volume with its purchase count in `d`.
Dataset recompute_sales_from_purchases(const Dataset& d);

/// Flags exactly max(1, floor(head_fraction * N)) items Head, by descending
/// sales_volume with ascending item_id breaking ties; the rest are Tail.
Dataset classify_head_tail(const Dataset& d, double head_fraction);

/// Number of Head items classify_head_tail produces for a catalog of n items.
std::size_t head_count(std::size_t n, double head_fraction);

/// Per user: the last ceil(f * n_u) interactions go to test, the rest to
/// train. Every user keeps at least one train interaction, so single-event
/// users never appear in test.
SplitDataset chronological_split(const Dataset& d, double holdout_fraction);

/// Number of a user's n interactions that chronological_split holds out.
std::size_t holdout_count(std::size_t n, double holdout_fraction);

struct SyntheticSpec {
  std::uint64_t seed = 42;
  std::size_t n_users = 1000;
  std::size_t n_items = 5000;
  std::size_t n_interactions = 50000;
  double zipf_exponent = 1.1;
  // Latent structure. Each item belongs to one cluster and has a few fixed
  // "successor" items; users prefer one or two clusters and, inside each,
  // a few cluster words ("taste") that steer part of their cluster draws.
  std::size_t n_clusters = 20;
  std::size_t successors_per_item = 3;
  double p_successor = 0.3;
  double p_cluster = 0.45;  // remaining mass is global popularity
  std::size_t cluster_vocab = 40;
  std::size_t global_vocab = 300;
  std::size_t taste_words = 3;
  double p_taste = 0.5;  // share of cluster draws restricted to taste items
};

/// Deterministic power-law dataset with cluster preferences and sequential
/// structure, so all three score channels carry signal.
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace ltrec
