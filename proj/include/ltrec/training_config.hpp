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

#include <cmath>
#include <cstdint>
#include <vector>

#include "ltrec/errors.hpp"

namespace ltrec {

struct TrainingConfig {
  int epochs = 10;
  int batch_size = 256;
  double learning_rate = 1e-4;
  std::uint64_t seed = 42;
  int negatives_per_positive = 1;

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw ConfigError("learning_rate must be a positive finite number");
    if (negatives_per_positive < 1) throw ConfigError("negatives_per_positive must be >= 1");
  }
};

/// Loss trajectory of one training run. `initial_loss` is measured before the
/// first update; epoch_loss[e] after epoch e, on the same fixed sample set.
struct TrainingReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;
};

}  // namespace ltrec
