// Copyright 2026 The M2KD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "m2kd/masked_store.hpp"

namespace m2kd {

class StepTrainer;
struct TrainConfig;

struct PruneConfig {
  double ratio = 0.75;
  std::size_t finetune_epochs = 15;
  std::optional<double> finetune_lr;  // defaults to lr0 / 25

  double learning_rate(const TrainConfig& train) const;
  void validate() const;
};

// 0.8 for batches of 20 or more classes, 0.75 below.
double default_prune_ratio(std::size_t classes_per_batch);

struct PruneOutcome {
  std::vector<std::size_t> frozen_per_layer;
  std::vector<double> finetune_trace;
  StepSidecar sidecar;
};

// Freezes the top free weights of each hidden layer under step k and zeroes
// the rest. The survivors are fine-tuned before the step-k sidecar is saved.
PruneOutcome prune_and_freeze_step(StepTrainer& trainer, int k,
                                   const PruneConfig& cfg, double weight_decay);

}  // namespace m2kd
