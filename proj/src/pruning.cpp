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

#include "m2kd/pruning.hpp"

#include "m2kd/error.hpp"
#include "m2kd/trainer.hpp"

namespace m2kd {

double PruneConfig::learning_rate(const TrainConfig& train) const {
  return finetune_lr.value_or(train.lr0 / 25.0);
}

void PruneConfig::validate() const {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("prune.ratio must lie in (0, 1)");
  }
  if (finetune_lr && !(*finetune_lr > 0.0)) {
    throw ConfigError("prune.finetune_lr must be > 0");
  }
}

double default_prune_ratio(std::size_t classes_per_batch) {
  return classes_per_batch >= 20 ? 0.8 : 0.75;
}

PruneOutcome prune_and_freeze_step(StepTrainer& trainer, int k,
                                   const PruneConfig& cfg, double weight_decay) {
  Network& net = trainer.network();
  PruneOutcome out;
  for (auto& layer : net.store().layers()) {
    out.frozen_per_layer.push_back(freeze_top(layer, k, cfg.ratio));
  }
  // Fresh buffers: the trainable set just changed.
  OptimizerState opt(net);
  const double lr = cfg.learning_rate(trainer.config());
  const auto step = static_cast<MaskValue>(k);
  for (std::size_t epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
    trainer.run_epoch(lr, weight_decay, step, opt, out.finetune_trace);
  }
  out.sidecar = net.snapshot_sidecar(k);
  return out;
}

}  // namespace m2kd
