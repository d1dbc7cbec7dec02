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

#include "ltrec/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ltrec/errors.hpp"
#include "ltrec/io.hpp"

namespace fs = std::filesystem;

namespace ltrec {

namespace {

std::string header(const RunConfig& c, const std::string& kind) {
  return "# ltrec " + kind + "\n# config " + config_echo(c) + "\n";
}

std::string weights_line(const FusionWeights& w) {
  return io::sig6(w.semantic) + " " + io::sig6(w.collaborative) + " " + io::sig6(w.generative);
}

void require(const fs::path& p, const std::string& stage) {
  if (!fs::exists(p))
    throw DependencyError("missing " + p.filename().string() + ": run stage '" + stage + "' first");
}

std::vector<std::string> vocab_of(const Catalog& c) {
  std::vector<std::string> v;
  v.reserve(c.size());
  for (const auto& it : c.items()) v.push_back(it.item_id);
  return v;
}

std::string training_lines(const std::string& prefix, const TrainingReport& r) {
  std::ostringstream o;
  o << prefix << "initial_loss " << io::sig6(r.initial_loss) << '\n';
  for (std::size_t e = 0; e < r.epoch_loss.size(); ++e)
    o << prefix << "epoch_" << e + 1 << "_loss " << io::sig6(r.epoch_loss[e]) << '\n';
  return o.str();
}

// Marker file guarding an output directory against concurrent runs.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / artifact::kLock) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw IoError("output directory " + dir.string() + " is in use (marker " + path_.string() +
                    " exists; remove it if no other run is active)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

FusionWeights parse_weights_arg(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) v.push_back(io::parse_double(part, "--weights"));
  if (v.size() != 3) throw ConfigError("--weights expects three comma-separated numbers");
  FusionWeights w{v[0], v[1], v[2]};
  w.validate();
  return w;
}

Stage parse_stage(const std::string& s) {
  if (s == "intent") return Stage::Intent;
  if (s == "cf") return Stage::Cf;
  if (s == "gen") return Stage::Gen;
  if (s == "align") return Stage::Align;
  if (s == "all") return Stage::All;
  throw ConfigError("unknown training component '" + s + "'");
}

void train_intent_stage(const RunConfig& c, const PreparedData& d, std::ostream& out) {
  TrainingReport rep;
  const SplitDataset train_only{d.split.train, Dataset(d.split.train.catalog_ptr(), {}), 0.0};
  const auto params =
      train_intent(train_only, *d.embeddings, c.pipeline.intent_train, c.pipeline.history_length, &rep);
  save_attention_params(params, c.output / artifact::kIntent);
  io::write_file(c.output / "intent_report.txt", header(c, "intent training") + training_lines("", rep));
  out << "intent: " << artifact::kIntent << " (final loss "
      << io::sig6(rep.epoch_loss.empty() ? rep.initial_loss : rep.epoch_loss.back()) << ")\n";
}

void train_cf_stage(const RunConfig& c, const PreparedData& d, std::ostream& out) {
  const InteractionMatrix m(d.split.train, c.pipeline.action_weights);
  std::string body = "nnz " + std::to_string(m.nnz()) + "\n";
  if (c.pipeline.cf_backend == CfBackend::ItemKNN) {
    ItemKnnModel(m, c.pipeline.k_neighbors).save(m, c.output / artifact::kCf);
    body += "backend itemknn\nk_neighbors " + std::to_string(c.pipeline.k_neighbors) + "\n";
  } else {
    TrainingReport rep;
    save_mf(train_bpr(m, c.pipeline.bpr, &rep), c.output / artifact::kCf);
    body += "backend bpr\n" + training_lines("", rep);
  }
  io::write_file(c.output / "cf_report.txt", header(c, "cf training") + body);
  out << "cf: " << artifact::kCf << '\n';
}

void train_gen_stage(const RunConfig& c, const PreparedData& d, std::ostream& out) {
  const auto& p = c.pipeline;
  const Dataset filtered = filter_training_sequences(d.split.train, p.filter_min_length, p.filter_action);
  const MarkovModel m = fit_markov(filtered, p.markov_order, p.markov_alpha);
  m.save(c.output / artifact::kMarkov);
  io::write_file(c.output / "gen_report.txt",
                 header(c, "sequence model fit") + "sequences " + std::to_string(filtered.users().size()) +
                     "\nevents " + std::to_string(filtered.interactions().size()) + "\n");
  out << "gen: " << artifact::kMarkov << '\n';
}

void train_align_stage(const RunConfig& c, const PreparedData& d, std::ostream& out) {
  require(c.output / artifact::kMarkov, "gen");
  const auto& p = c.pipeline;
  const MarkovModel base = MarkovModel::load(c.output / artifact::kMarkov, vocab_of(d.split.train.catalog()));
  if (!p.align) {
    base.save(c.output / artifact::kAligned);
    io::write_file(c.output / "align_report.txt", header(c, "alignment") + "enabled false\n");
    out << "align: disabled, " << artifact::kAligned << " copies " << artifact::kMarkov << '\n';
    return;
  }
  const SplitDataset inner = validation_split(d.split.train, p.validation_fraction);
  save_rankings(make_alignment_rankings(base, inner, p), c.output / artifact::kRankings);
  const auto rankings = load_rankings(c.output / artifact::kRankings);
  AlignReport rep;
  MarkovModel aligned = base;
  if (!rankings.empty()) aligned = align_generative(base, rankings, p.align_config, &rep);
  aligned.save(c.output / artifact::kAligned);
  std::ostringstream o;
  o << "rankings " << rankings.size() << "\npairs " << rep.pairs << "\nviolations_before " << rep.violations_before
    << "\nviolations_after " << rep.violations_after << "\nselected_epoch " << rep.selected_epoch << '\n';
  o << training_lines("", {rep.initial_loss, rep.epoch_loss});
  io::write_file(c.output / "align_report.txt", header(c, "alignment") + o.str());
  out << "align: " << artifact::kRankings << ", " << artifact::kAligned << " (violations " << rep.violations_before
      << " -> " << rep.violations_after << ")\n";
}

nlohmann::ordered_json weights_json(const FusionWeights& w) {
  return {{"semantic", w.semantic}, {"collaborative", w.collaborative}, {"generative", w.generative}};
}

}  // namespace

PreparedData prepare_data(const RunConfig& c, bool need_embeddings) {
  require(c.catalog_path(), "generate");
  require(c.interactions_path(), "generate");
  const Dataset d = classify_head_tail(load_dataset(c.catalog_path(), c.interactions_path()), c.head_fraction);
  PreparedData out{chronological_split(d, c.holdout_fraction), nullptr};
  if (need_embeddings) {
    require(c.embeddings_path(), "generate");
    out.embeddings = std::make_shared<const EmbeddingMatrix>(ingest_embeddings(c.embeddings_path(), d.catalog()));
    if (out.embeddings->dim() != c.embedding_dim)
      throw ConfigError("embeddings have dim " + std::to_string(out.embeddings->dim()) + ", config says " +
                        std::to_string(c.embedding_dim));
  }
  return out;
}

std::shared_ptr<const TrainedComponents> load_components(const RunConfig& c, const PreparedData& data) {
  const fs::path dir = c.output;
  require(dir / artifact::kIntent, "intent");
  require(dir / artifact::kCf, "cf");
  require(dir / artifact::kMarkov, "gen");
  require(dir / artifact::kAligned, "align");
  const Dataset& train = data.split.train;
  auto comps = std::make_shared<TrainedComponents>();
  comps->train = std::make_shared<const Dataset>(train);
  comps->embeddings = data.embeddings;
  comps->attention = load_attention_params(dir / artifact::kIntent);
  if (comps->attention.dim != data.embeddings->dim())
    throw DependencyError("intent.params dim differs from the embeddings; rerun stage 'intent'");
  auto matrix = std::make_shared<const InteractionMatrix>(train, c.pipeline.action_weights);
  comps->matrix = matrix;
  std::string tag;
  {
    std::ifstream in(dir / artifact::kCf);
    in >> tag;
  }
  const bool is_knn = tag == "ltrec-itemknn";
  if (is_knn != (c.pipeline.cf_backend == CfBackend::ItemKNN))
    throw DependencyError("cf.model was built with another backend; rerun stage 'cf'");
  if (is_knn) {
    comps->cf = CfScorer(matrix, ItemKnnModel::load(*matrix, dir / artifact::kCf));
  } else {
    MFModel mf = load_mf(dir / artifact::kCf);
    if (mf.n_users() != matrix->n_users() || mf.n_items() != matrix->n_items())
      throw DependencyError("cf.model shape differs from the training split; rerun stage 'cf'");
    comps->cf = CfScorer(matrix, std::move(mf));
  }
  const auto vocab = vocab_of(train.catalog());
  comps->markov = MarkovModel::load(dir / artifact::kMarkov, vocab);
  comps->aligned_markov = MarkovModel::load(dir / artifact::kAligned, vocab);
  return comps;
}

FusionWeights effective_weights(const RunConfig& c) {
  const fs::path p = c.output / artifact::kWeights;
  if (!fs::exists(p)) return c.pipeline.weights;
  std::ifstream in(p);
  try {
    const auto j = nlohmann::json::parse(in);
    FusionWeights w{j.at("semantic").get<double>(), j.at("collaborative").get<double>(),
                    j.at("generative").get<double>()};
    w.validate();
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed " + p.string() + ": " + e.what());
  }
}

void cmd_generate(const RunConfig& c, bool force, std::ostream& out) {
  const fs::path cat = c.output / artifact::kCatalog, inter = c.output / artifact::kInteractions,
                 emb = c.output / artifact::kEmbeddings;
  if (!force)
    for (const auto& p : {cat, inter, emb})
      if (fs::exists(p)) throw IoError(p.string() + " exists; pass --force to overwrite");
  const Dataset d = generate_synthetic(c.synthetic);
  save_catalog(d, cat);
  save_interactions(d, inter);
  save_embeddings(pseudo_embed_catalog(d.catalog(), c.embedding_dim, c.seed, c.pooling), emb);
  out << "generated " << d.catalog().size() << " items, " << d.users().size() << " users, "
      << d.interactions().size() << " interactions in " << c.output.string() << '\n';
}

FusionWeights cmd_gridsearch(const RunConfig& c, std::ostream& out) {
  const PreparedData d = prepare_data(c);
  const auto r = grid_search(d.split, d.embeddings, c.grid_step, c.grid_metric, c.pipeline);
  std::ostringstream o;
  o << header(c, "weight grid search") << "metric " << metric_name(c.grid_metric) << "\npoints "
    << r.points.size() << '\n';
  for (std::size_t i = 0; i < r.points.size(); ++i)
    o << "point " << weights_line(r.points[i]) << ' ' << io::sig6(r.metric[i]) << '\n';
  o << "best " << weights_line(r.best) << '\n';
  io::write_file(c.output / artifact::kGrid, o.str());
  auto j = weights_json(r.best);
  j["metric"] = metric_name(c.grid_metric);
  j["grid_step"] = c.grid_step;
  io::write_file(c.output / artifact::kWeights, j.dump(2) + "\n");
  out << "gridsearch: " << r.points.size() << " points, best " << weights_line(r.best) << " -> "
      << artifact::kWeights << '\n';
  return r.best;
}

void cmd_train(const RunConfig& c, Stage stage, std::ostream& out) {
  const PreparedData d = prepare_data(c, stage == Stage::Intent || stage == Stage::All);
  if (stage == Stage::Intent || stage == Stage::All) train_intent_stage(c, d, out);
  if (stage == Stage::Cf || stage == Stage::All) train_cf_stage(c, d, out);
  if (stage == Stage::Gen || stage == Stage::All) train_gen_stage(c, d, out);
  if (stage == Stage::Align || stage == Stage::All) train_align_stage(c, d, out);
  if (stage == Stage::All) cmd_gridsearch(c, out);
}

void cmd_recommend(const RunConfig& c, const std::string& user_id, std::size_t k,
                   const std::optional<FusionWeights>& weights, const std::vector<std::string>& cold_items,
                   const fs::path& export_path, std::ostream& out) {
  if (k < 1) throw ConfigError("k must be >= 1");
  const PreparedData d = prepare_data(c);
  const Catalog& cat = d.split.train.catalog();

  if (!cold_items.empty()) {
    // Semantic-only ranking from a caller-supplied history.
    require(c.output / artifact::kIntent, "intent");
    const auto params = load_attention_params(c.output / artifact::kIntent);
    std::vector<std::size_t> rows;
    for (const auto& id : cold_items) rows.push_back(cat.index_of(id));
    const std::size_t n = std::min(rows.size(), c.pipeline.history_length);
    const auto iv = intent_rows(std::span(rows).last(n), params, *d.embeddings);
    std::vector<bool> excluded(cat.size(), false);
    for (auto r : rows) excluded[r] = true;
    out << "rank item_id s_sem\n";
    std::size_t rank = 0;
    for (const auto& [j, s] : top_k_semantic_rows(iv.h, *d.embeddings, k, excluded))
      out << ++rank << ' ' << cat[j].item_id << ' ' << io::sig6(s) << '\n';
    return;
  }

  const FusionWeights w = weights ? *weights : effective_weights(c);
  const Recommender rec(load_components(c, d), w, c.pipeline.normalization, c.pipeline.k_each,
                        c.pipeline.history_length);
  const UserState s = rec.prepare(user_id);
  const CandidateScores sc = rec.candidates_for(s, k);
  const RecommendationList list = rec.rank(s, sc, w, k);
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < sc.items.size(); ++i) pos[cat[sc.items[i]].item_id] = i;
  out << "rank item_id fused s_sem s_cf s_gen\n";
  for (std::size_t r = 0; r < list.items.size(); ++r) {
    const auto& t = sc.normalized[pos[list.items[r].item_id]];
    out << r + 1 << ' ' << list.items[r].item_id << ' ' << io::sig6(list.items[r].score) << ' ' << io::sig6(t.s_sem)
        << ' ' << io::sig6(t.s_cf) << ' ' << io::sig6(t.s_gen) << '\n';
  }
  if (!export_path.empty()) {
    std::ostringstream o;
    o << list.user_id;
    for (const auto& it : list.items) o << ' ' << it.item_id << ' ' << io::sig6(it.score);
    o << '\n';
    io::write_file(export_path, o.str());
  }
}

void cmd_evaluate(const RunConfig& c, const std::optional<FusionWeights>& weights, std::ostream& out) {
  const PreparedData d = prepare_data(c);
  const FusionWeights w = weights ? *weights : effective_weights(c);
  const Recommender rec(load_components(c, d), w, c.pipeline.normalization, c.pipeline.k_each,
                        c.pipeline.history_length);
  const std::vector<FusionWeights> ws{w, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const auto reports = evaluate_weightings(rec, d.split, ws, c.eval);

  const std::string head = header(c, "evaluation") + "# weights " + weights_line(w) + "\n";
  io::write_file(c.output / artifact::kEvalReport, head + reports[0].to_kv());
  io::write_file(c.output / artifact::kEvalTable, head + reports[0].to_table());
  const std::vector<ExperimentResult> cmp{
      {"fusion", reports[0]}, {"semantic", reports[1]}, {"cf", reports[2]}, {"generative", reports[3]}};
  io::write_file(c.output / artifact::kComparison, head + comparison_table(cmp));

  // Wall-clock numbers vary run to run, so they live in their own file.
  std::vector<std::string> users(d.split.train.users().begin(),
                                 d.split.train.users().begin() +
                                     static_cast<std::ptrdiff_t>(std::min(c.bench_users, d.split.train.users().size())));
  const auto lat = measure_latency([&](const std::string& u) { (void)rec.recommend(u, 10); }, users, c.bench_warmup);
  std::ostringstream lo;
  lo << "latency_median_ms " << io::sig6(lat.median_ms) << "\nlatency_p95_ms " << io::sig6(lat.p95_ms)
     << "\nlatency_mean_ms " << io::sig6(lat.mean_ms) << "\nsamples " << lat.samples_ms.size() << '\n';
  io::write_file(c.output / artifact::kLatency, header(c, "evaluation latency") + lo.str());

  out << comparison_table(cmp) << lo.str();
}

LatencyStats cmd_bench(const RunConfig& c, std::ostream& out) {
  const PreparedData d = prepare_data(c);
  const FusionWeights w = effective_weights(c);
  const Recommender rec(load_components(c, d), w, c.pipeline.normalization, c.pipeline.k_each,
                        c.pipeline.history_length);
  const auto& all = d.split.train.users();
  std::vector<std::string> users(all.begin(),
                                 all.begin() + static_cast<std::ptrdiff_t>(std::min(c.bench_users, all.size())));
  const auto lat = measure_latency([&](const std::string& u) { (void)rec.recommend(u, 10); }, users, c.bench_warmup);
  std::ostringstream o;
  o << "users " << users.size() << "\nwarmup " << c.bench_warmup << "\nmedian_ms " << io::sig6(lat.median_ms)
    << "\np95_ms " << io::sig6(lat.p95_ms) << "\nmean_ms " << io::sig6(lat.mean_ms) << "\nbound_ms "
    << io::sig6(c.latency_bound_ms) << "\nbound_check " << (lat.median_ms < c.latency_bound_ms ? "PASS" : "FAIL")
    << '\n';
  io::write_file(c.output / artifact::kBench, header(c, "latency benchmark") + o.str());
  out << o.str();
  return lat;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ltrec: offline hybrid long-tail recommender"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, output, weights_arg, component = "all", user, export_path;
  std::optional<std::uint64_t> seed;
  bool force = false;
  std::size_t k = 10;
  std::optional<double> step;
  std::optional<std::string> metric;
  std::optional<std::size_t> bench_users, bench_warmup;
  std::vector<std::string> cold_items;

  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "seed for every random component");
  app.add_flag("--force", force, "overwrite generated data");
  app.add_option("--output", output, "output directory");

  auto* gen = app.add_subcommand("generate", "write a synthetic catalog, log and embeddings");
  auto* train = app.add_subcommand("train", "train components");
  train->add_option("--component", component, "intent, cf, gen, align or all")
      ->check(CLI::IsMember({"intent", "cf", "gen", "align", "all"}));
  auto* recommend = app.add_subcommand("recommend", "top-k list for one user");
  recommend->add_option("--user", user, "user id");
  recommend->add_option("--k", k, "list size");
  recommend->add_option("--weights", weights_arg, "semantic,cf,generative");
  recommend->add_option("--cold-start-semantic", cold_items, "semantic-only ranking from these item ids")
      ->delimiter(',');
  recommend->add_option("--export", export_path, "also write the list as one line: user_id then item/score pairs");
  auto* evaluate = app.add_subcommand("evaluate", "metric report on the held-out split");
  evaluate->add_option("--weights", weights_arg, "semantic,cf,generative");
  auto* grid = app.add_subcommand("gridsearch", "tune fusion weights on the validation slice");
  grid->add_option("--step", step, "simplex spacing");
  grid->add_option("--metric", metric, "ndcg@10 or recall@50");
  auto* bench = app.add_subcommand("bench", "recommendation latency");
  bench->add_option("--users", bench_users, "users timed");
  bench->add_option("--warmup", bench_warmup, "untimed warmup calls");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : ConfigError("").exit_code();
  }

  try {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) c.apply_seed(*seed);
    if (!output.empty()) c.output = output;
    if (step) c.grid_step = *step;
    if (metric) c.grid_metric = parse_metric(*metric);
    if (bench_users) c.bench_users = *bench_users;
    if (bench_warmup) c.bench_warmup = *bench_warmup;
    c.validate();
    std::optional<FusionWeights> w;
    if (!weights_arg.empty()) w = parse_weights_arg(weights_arg);

    const OutputLock lock(c.output);
    if (gen->parsed()) {
      cmd_generate(c, force, out);
    } else if (train->parsed()) {
      cmd_train(c, parse_stage(component), out);
    } else if (recommend->parsed()) {
      if (user.empty() && cold_items.empty()) throw ConfigError("recommend needs --user or --cold-start-semantic");
      cmd_recommend(c, user, k, w, cold_items, export_path, out);
    } else if (evaluate->parsed()) {
      cmd_evaluate(c, w, out);
    } else if (grid->parsed()) {
      cmd_gridsearch(c, out);
    } else if (bench->parsed()) {
      const auto lat = cmd_bench(c, out);
      if (!(lat.median_ms < c.latency_bound_ms)) err << "median latency above the bound\n";
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace ltrec
