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

// Run configuration for the command-line tool. Stored as a JSON object; every
// key is optional and unknown keys are rejected. Example:
//
//   {
//     "seed": 7,
//     "synthetic": {"users": 500, "items": 2000, "interactions": 20000},
//     "attention": {"epochs": 5},
//     "cf": {"backend": "itemknn", "k_neighbors": 50},
//     "fusion": {"weights": [0.3, 0.4, 0.3], "normalization": "minmax"},
//     "eval": {"k": [10, 50]}
//   }

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "ltrec/data_model.hpp"
#include "ltrec/embedding_store.hpp"
#include "ltrec/evaluation.hpp"
#include "ltrec/pipeline.hpp"

namespace ltrec {

struct DataPaths {
  // Empty paths resolve inside the output directory.
  std::filesystem::path catalog;
  std::filesystem::path interactions;
  std::filesystem::path embeddings;
};

struct RunConfig {
  std::uint64_t seed = 42;
  std::filesystem::path output = "ltrec_out";
  DataPaths data;
  SyntheticSpec synthetic{};
  double head_fraction = 0.10;
  double holdout_fraction = 0.2;
  std::size_t embedding_dim = 32;
  Pooling pooling = Pooling::Average;
  PipelineConfig pipeline{};
  double grid_step = 0.1;
  TuningMetric grid_metric = TuningMetric::Recall50;
  EvalConfig eval{};
  std::size_t bench_users = 200;
  std::size_t bench_warmup = 10;
  double latency_bound_ms = 200.0;

  /// Copies `seed` into every seeded component.
  void apply_seed(std::uint64_t s);
  void validate() const;

  std::filesystem::path catalog_path() const;
  std::filesystem::path interactions_path() const;
  std::filesystem::path embeddings_path() const;
};

/// Defaults overridden by the keys present in `text` (a JSON object).
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical single-line JSON of the effective configuration.
std::string config_echo(const RunConfig& c);

std::string metric_name(TuningMetric m);
TuningMetric parse_metric(const std::string& s);

}  // namespace ltrec
