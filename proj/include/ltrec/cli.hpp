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

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ltrec/config.hpp"

namespace ltrec {

// File names inside the output directory.
namespace artifact {
inline constexpr const char* kCatalog = "catalog.jsonl";
inline constexpr const char* kInteractions = "interactions.jsonl";
inline constexpr const char* kEmbeddings = "embeddings.jsonl";
inline constexpr const char* kIntent = "intent.params";
inline constexpr const char* kCf = "cf.model";
inline constexpr const char* kMarkov = "markov.model";
inline constexpr const char* kRankings = "rankings.jsonl";
inline constexpr const char* kAligned = "markov_aligned.model";
inline constexpr const char* kWeights = "weights.json";
inline constexpr const char* kEvalReport = "eval_report.txt";
inline constexpr const char* kEvalTable = "eval_table.txt";
inline constexpr const char* kComparison = "comparison.txt";
inline constexpr const char* kLatency = "latency_report.txt";
inline constexpr const char* kGrid = "gridsearch_report.txt";
inline constexpr const char* kBench = "bench_report.txt";
inline constexpr const char* kLock = ".ltrec.lock";
}  // namespace artifact

enum class Stage { Intent, Cf, Gen, Align, All };

/// Loaded dataset in the state every command works on: tail flags assigned
/// and split chronologically.
struct PreparedData {
  SplitDataset split;
  std::shared_ptr<const EmbeddingMatrix> embeddings;
};

PreparedData prepare_data(const RunConfig& c, bool need_embeddings = true);

/// Trained components from the artifacts in c.output. Throws DependencyError
/// naming the first missing stage.
std::shared_ptr<const TrainedComponents> load_components(const RunConfig& c, const PreparedData& data);

/// weights.json when present, else the configured weights.
FusionWeights effective_weights(const RunConfig& c);

void cmd_generate(const RunConfig& c, bool force, std::ostream& out);
void cmd_train(const RunConfig& c, Stage stage, std::ostream& out);
void cmd_recommend(const RunConfig& c, const std::string& user_id, std::size_t k,
                   const std::optional<FusionWeights>& weights, const std::vector<std::string>& cold_items,
                   const std::filesystem::path& export_path, std::ostream& out);
void cmd_evaluate(const RunConfig& c, const std::optional<FusionWeights>& weights, std::ostream& out);
FusionWeights cmd_gridsearch(const RunConfig& c, std::ostream& out);
LatencyStats cmd_bench(const RunConfig& c, std::ostream& out);

/// Full command line (argv[0] included). Returns the process exit code:
/// 0 ok, 2 config, 3 data, 4 dependency, 5 io, 6 cold user, 1 other.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ltrec
