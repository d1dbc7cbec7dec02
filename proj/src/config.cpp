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

#include "ltrec/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "ltrec/errors.hpp"

namespace ltrec {

using json = nlohmann::ordered_json;

namespace {

// Reads the keys of one JSON object section into typed fields.
class Section {
 public:
  Section(const json& j, std::string name, std::initializer_list<const char*> allowed) : name_(std::move(name)) {
    if (!j.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) throw ConfigError("unknown config key '" + prefix() + it.key() + "'");
    }
    j_ = &j;
  }

  template <class T>
  void get(const char* key, T& out) const {
    auto it = j_->find(key);
    if (it == j_->end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + prefix() + key + "' has the wrong type");
    }
  }

  void get_size(const char* key, std::size_t& out) const {
    auto it = j_->find(key);
    if (it == j_->end()) return;
    if (!it->is_number_integer() || it->get<long long>() < 0)
      throw ConfigError("config key '" + prefix() + key + "' must be a nonnegative integer");
    out = it->get<std::size_t>();
  }

  void get_int(const char* key, int& out) const {
    auto it = j_->find(key);
    if (it == j_->end()) return;
    if (!it->is_number_integer()) throw ConfigError("config key '" + prefix() + key + "' must be an integer");
    out = it->get<int>();
  }

  void get_real(const char* key, double& out) const {
    auto it = j_->find(key);
    if (it == j_->end()) return;
    if (!it->is_number()) throw ConfigError("config key '" + prefix() + key + "' must be a number");
    out = it->get<double>();
  }

  const json* sub(const char* key) const {
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  std::string prefix() const { return name_.empty() ? "" : name_ + "."; }

 private:
  const json* j_ = nullptr;
  std::string name_;
};

std::string backend_name(CfBackend b) { return b == CfBackend::BPR ? "bpr" : "itemknn"; }
CfBackend parse_backend(const std::string& s) {
  if (s == "bpr") return CfBackend::BPR;
  if (s == "itemknn") return CfBackend::ItemKNN;
  throw ConfigError("cf.backend must be 'itemknn' or 'bpr', got '" + s + "'");
}

std::string norm_name(Normalization n) {
  switch (n) {
    case Normalization::ZScore: return "zscore";
    case Normalization::MinMax: return "minmax";
    case Normalization::None: return "none";
  }
  return "zscore";
}
Normalization parse_norm(const std::string& s) {
  if (s == "zscore") return Normalization::ZScore;
  if (s == "minmax") return Normalization::MinMax;
  if (s == "none") return Normalization::None;
  throw ConfigError("fusion.normalization must be zscore, minmax or none, got '" + s + "'");
}

std::string loss_name(RankingLoss l) { return l == RankingLoss::RankNet ? "ranknet" : "listmle"; }
RankingLoss parse_loss(const std::string& s) {
  if (s == "listmle") return RankingLoss::ListMLE;
  if (s == "ranknet") return RankingLoss::RankNet;
  throw ConfigError("align.loss must be listmle or ranknet, got '" + s + "'");
}

std::string pooling_name(Pooling p) { return p == Pooling::First ? "first" : "average"; }
Pooling parse_pooling(const std::string& s) {
  if (s == "average") return Pooling::Average;
  if (s == "first") return Pooling::First;
  throw ConfigError("embedding.pooling must be average or first, got '" + s + "'");
}

void read_training(const Section& s, TrainingConfig& t) {
  s.get_int("epochs", t.epochs);
  s.get_int("batch_size", t.batch_size);
  s.get_real("learning_rate", t.learning_rate);
}

json training_json(const TrainingConfig& t) {
  return json{{"epochs", t.epochs}, {"batch_size", t.batch_size}, {"learning_rate", t.learning_rate}};
}

}  // namespace

std::string metric_name(TuningMetric m) { return m == TuningMetric::NDCG10 ? "ndcg@10" : "recall@50"; }

TuningMetric parse_metric(const std::string& s) {
  if (s == "ndcg@10") return TuningMetric::NDCG10;
  if (s == "recall@50") return TuningMetric::Recall50;
  throw ConfigError("metric must be ndcg@10 or recall@50, got '" + s + "'");
}

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  synthetic.seed = s;
  pipeline.intent_train.seed = s;
  pipeline.bpr.train.seed = s;
  pipeline.align_config.train.seed = s;
  eval.seed = s;
}

void RunConfig::validate() const {
  if (synthetic.n_users < 1 || synthetic.n_items < 1 || synthetic.n_interactions < synthetic.n_users)
    throw ConfigError("synthetic sizes must be >= 1 with interactions >= users");
  if (!(synthetic.zipf_exponent > 0.0)) throw ConfigError("synthetic.zipf must be > 0");
  if (synthetic.n_clusters < 1 || synthetic.cluster_vocab < 1 || synthetic.global_vocab < 1)
    throw ConfigError("synthetic cluster and vocabulary sizes must be >= 1");
  for (double p : {synthetic.p_successor, synthetic.p_cluster, synthetic.p_taste})
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("synthetic probabilities must lie in [0, 1]");
  if (synthetic.p_successor + synthetic.p_cluster > 1.0) throw ConfigError("p_successor + p_cluster must be <= 1");
  if (!(head_fraction > 0.0 && head_fraction <= 1.0)) throw ConfigError("head_fraction must lie in (0, 1]");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout_fraction must lie in (0, 1)");
  if (embedding_dim < kMinEmbeddingDim || embedding_dim > kMaxEmbeddingDim)
    throw ConfigError("embedding.dim must lie in [" + std::to_string(kMinEmbeddingDim) + ", " +
                      std::to_string(kMaxEmbeddingDim) + "]");
  pipeline.validate();
  if (!(grid_step > 0.0 && grid_step <= 1.0)) throw ConfigError("fusion.grid_step must lie in (0, 1]");
  eval.validate();
  if (bench_users < 1) throw ConfigError("bench.users must be >= 1");
  if (!(latency_bound_ms > 0.0)) throw ConfigError("bench.bound_ms must be > 0");
}

std::filesystem::path RunConfig::catalog_path() const {
  return data.catalog.empty() ? output / "catalog.jsonl" : data.catalog;
}
std::filesystem::path RunConfig::interactions_path() const {
  return data.interactions.empty() ? output / "interactions.jsonl" : data.interactions;
}
std::filesystem::path RunConfig::embeddings_path() const {
  return data.embeddings.empty() ? output / "embeddings.jsonl" : data.embeddings;
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  const Section top(j, "", {"seed", "output", "data", "synthetic", "split", "embedding", "attention", "cf",
                            "markov", "align", "fusion", "eval", "bench"});
  if (const json* v = top.sub("seed")) {
    if (!v->is_number_integer() || v->get<long long>() < 0) throw ConfigError("seed must be a nonnegative integer");
    c.apply_seed(v->get<std::uint64_t>());
  }
  std::string s;
  if (top.sub("output")) {
    top.get("output", s);
    c.output = s;
  }
  if (const json* d = top.sub("data")) {
    const Section sec(*d, "data", {"catalog", "interactions", "embeddings"});
    for (auto [key, dst] : {std::pair{"catalog", &c.data.catalog}, std::pair{"interactions", &c.data.interactions},
                            std::pair{"embeddings", &c.data.embeddings}}) {
      if (!sec.sub(key)) continue;
      sec.get(key, s);
      *dst = s;
    }
  }
  if (const json* d = top.sub("synthetic")) {
    const Section sec(*d, "synthetic", {"users", "items", "interactions", "zipf", "clusters", "p_successor",
                                        "p_cluster", "taste_words", "p_taste"});
    sec.get_size("users", c.synthetic.n_users);
    sec.get_size("items", c.synthetic.n_items);
    sec.get_size("interactions", c.synthetic.n_interactions);
    sec.get_real("zipf", c.synthetic.zipf_exponent);
    sec.get_size("clusters", c.synthetic.n_clusters);
    sec.get_real("p_successor", c.synthetic.p_successor);
    sec.get_real("p_cluster", c.synthetic.p_cluster);
    sec.get_size("taste_words", c.synthetic.taste_words);
    sec.get_real("p_taste", c.synthetic.p_taste);
  }
  if (const json* d = top.sub("split")) {
    const Section sec(*d, "split", {"head_fraction", "holdout_fraction"});
    sec.get_real("head_fraction", c.head_fraction);
    sec.get_real("holdout_fraction", c.holdout_fraction);
  }
  if (const json* d = top.sub("embedding")) {
    const Section sec(*d, "embedding", {"dim", "pooling"});
    sec.get_size("dim", c.embedding_dim);
    if (sec.sub("pooling")) {
      sec.get("pooling", s);
      c.pooling = parse_pooling(s);
    }
  }
  auto& p = c.pipeline;
  if (const json* d = top.sub("attention")) {
    const Section sec(*d, "attention", {"t_max", "epochs", "batch_size", "learning_rate"});
    sec.get_size("t_max", p.history_length);
    read_training(sec, p.intent_train);
  }
  if (const json* d = top.sub("cf")) {
    const Section sec(*d, "cf", {"backend", "k_neighbors", "factors", "reg", "init_std", "epochs", "batch_size",
                                 "learning_rate", "action_weights"});
    if (sec.sub("backend")) {
      sec.get("backend", s);
      p.cf_backend = parse_backend(s);
    }
    sec.get_size("k_neighbors", p.k_neighbors);
    sec.get_size("factors", p.bpr.factors);
    sec.get_real("reg", p.bpr.reg);
    sec.get_real("init_std", p.bpr.init_std);
    read_training(sec, p.bpr.train);
    if (const json* w = sec.sub("action_weights")) {
      if (!w->is_array() || w->size() != 3) throw ConfigError("cf.action_weights must be [click, cart, purchase]");
      for (const auto& x : *w)
        if (!x.is_number()) throw ConfigError("cf.action_weights entries must be numbers");
      p.action_weights = {(*w)[0].get<double>(), (*w)[1].get<double>(), (*w)[2].get<double>()};
    }
  }
  if (const json* d = top.sub("markov")) {
    const Section sec(*d, "markov", {"order", "alpha", "min_length", "required_action"});
    sec.get_int("order", p.markov_order);
    sec.get_real("alpha", p.markov_alpha);
    sec.get_size("min_length", p.filter_min_length);
    if (const json* a = sec.sub("required_action")) {
      if (a->is_null()) {
        p.filter_action.reset();
      } else {
        sec.get("required_action", s);
        try {
          p.filter_action = parse_action(s);
        } catch (const Error&) {
          throw ConfigError("markov.required_action must be click, cart or purchase");
        }
      }
    }
  }
  if (const json* d = top.sub("align")) {
    const Section sec(*d, "align", {"enabled", "loss", "epochs", "batch_size", "learning_rate", "beam_width",
                                    "ctr_weight", "cvr_weight", "validation_fraction"});
    sec.get("enabled", p.align);
    if (sec.sub("loss")) {
      sec.get("loss", s);
      p.align_config.loss = parse_loss(s);
    }
    read_training(sec, p.align_config.train);
    sec.get_size("beam_width", p.beam_width);
    sec.get_real("ctr_weight", p.ctr_weight);
    sec.get_real("cvr_weight", p.cvr_weight);
    sec.get_real("validation_fraction", p.validation_fraction);
  }
  if (const json* d = top.sub("fusion")) {
    const Section sec(*d, "fusion", {"weights", "normalization", "k_each", "grid_step", "grid_metric"});
    if (const json* w = sec.sub("weights")) {
      if (!w->is_array() || w->size() != 3) throw ConfigError("fusion.weights must be [semantic, cf, generative]");
      for (const auto& x : *w)
        if (!x.is_number()) throw ConfigError("fusion.weights entries must be numbers");
      p.weights = {(*w)[0].get<double>(), (*w)[1].get<double>(), (*w)[2].get<double>()};
    }
    if (sec.sub("normalization")) {
      sec.get("normalization", s);
      p.normalization = parse_norm(s);
    }
    sec.get_size("k_each", p.k_each);
    sec.get_real("grid_step", c.grid_step);
    if (sec.sub("grid_metric")) {
      sec.get("grid_metric", s);
      c.grid_metric = parse_metric(s);
    }
  }
  if (const json* d = top.sub("eval")) {
    const Section sec(*d, "eval", {"k", "sample_pairs", "tail_k", "tail_distinct", "purchase_only"});
    if (const json* k = sec.sub("k")) {
      if (!k->is_array()) throw ConfigError("eval.k must be a list of integers");
      c.eval.ks.clear();
      for (const auto& x : *k) {
        if (!x.is_number_integer() || x.get<long long>() < 1) throw ConfigError("eval.k entries must be >= 1");
        c.eval.ks.push_back(x.get<std::size_t>());
      }
    }
    sec.get_size("sample_pairs", c.eval.diversity_pairs);
    sec.get_size("tail_k", c.eval.tail_k);
    sec.get("tail_distinct", c.eval.tail_distinct);
    sec.get("purchase_only", c.eval.purchase_only);
  }
  if (const json* d = top.sub("bench")) {
    const Section sec(*d, "bench", {"users", "warmup", "bound_ms"});
    sec.get_size("users", c.bench_users);
    sec.get_size("warmup", c.bench_warmup);
    sec.get_real("bound_ms", c.latency_bound_ms);
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string config_echo(const RunConfig& c) {
  const auto& p = c.pipeline;
  json j;
  j["seed"] = c.seed;
  j["output"] = c.output.string();
  j["data"] = {{"catalog", c.catalog_path().string()},
               {"interactions", c.interactions_path().string()},
               {"embeddings", c.embeddings_path().string()}};
  j["synthetic"] = {{"users", c.synthetic.n_users},
                    {"items", c.synthetic.n_items},
                    {"interactions", c.synthetic.n_interactions},
                    {"zipf", c.synthetic.zipf_exponent},
                    {"clusters", c.synthetic.n_clusters},
                    {"p_successor", c.synthetic.p_successor},
                    {"p_cluster", c.synthetic.p_cluster},
                    {"taste_words", c.synthetic.taste_words},
                    {"p_taste", c.synthetic.p_taste}};
  j["split"] = {{"head_fraction", c.head_fraction}, {"holdout_fraction", c.holdout_fraction}};
  j["embedding"] = {{"dim", c.embedding_dim}, {"pooling", pooling_name(c.pooling)}};
  j["attention"] = training_json(p.intent_train);
  j["attention"]["t_max"] = p.history_length;
  j["cf"] = training_json(p.bpr.train);
  j["cf"]["backend"] = backend_name(p.cf_backend);
  j["cf"]["k_neighbors"] = p.k_neighbors;
  j["cf"]["factors"] = p.bpr.factors;
  j["cf"]["reg"] = p.bpr.reg;
  j["cf"]["init_std"] = p.bpr.init_std;
  j["cf"]["action_weights"] = {p.action_weights.click, p.action_weights.cart, p.action_weights.purchase};
  j["markov"] = {{"order", p.markov_order}, {"alpha", p.markov_alpha}, {"min_length", p.filter_min_length}};
  j["markov"]["required_action"] =
      p.filter_action ? json(std::string(action_name(*p.filter_action))) : json(nullptr);
  j["align"] = training_json(p.align_config.train);
  j["align"]["enabled"] = p.align;
  j["align"]["loss"] = loss_name(p.align_config.loss);
  j["align"]["beam_width"] = p.beam_width;
  j["align"]["ctr_weight"] = p.ctr_weight;
  j["align"]["cvr_weight"] = p.cvr_weight;
  j["align"]["validation_fraction"] = p.validation_fraction;
  j["fusion"] = {{"weights", {p.weights.semantic, p.weights.collaborative, p.weights.generative}},
                 {"normalization", norm_name(p.normalization)},
                 {"k_each", p.k_each},
                 {"grid_step", c.grid_step},
                 {"grid_metric", metric_name(c.grid_metric)}};
  j["eval"] = {{"k", c.eval.ks},
               {"sample_pairs", c.eval.diversity_pairs},
               {"tail_k", c.eval.tail_k},
               {"tail_distinct", c.eval.tail_distinct},
               {"purchase_only", c.eval.purchase_only}};
  j["bench"] = {{"users", c.bench_users}, {"warmup", c.bench_warmup}, {"bound_ms", c.latency_bound_ms}};
  return j.dump();
}

}  // namespace ltrec
