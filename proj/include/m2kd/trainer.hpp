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
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "m2kd/data.hpp"
#include "m2kd/losses.hpp"
#include "m2kd/masked_store.hpp"
#include "m2kd/network.hpp"
#include "m2kd/rng.hpp"

namespace m2kd {

struct PruneConfig;

struct TrainConfig {
  std::size_t epochs = 80;
  std::size_t batch_size = 128;
  double lr0 = 2.0;
  double lr_decay_factor = 5.0;
  std::size_t lr_decay_every = 40;
  double momentum = 0.9;
  double weight_decay_first_step = 1e-5;
  std::uint64_t seed = 0;
  bool augment = true;  // horizontal flips; no effect on tabular data

  void validate() const;
};

// lr0 / factor^floor(epoch / every)
double lr_at(std::size_t epoch, const TrainConfig& cfg);

// SGD with momentum on one parameter group. Positions whose mask differs from
// `trainable` are skipped entirely: neither the parameter nor its buffer moves.
// An empty mask means every position is trainable.
void sgd_step(std::span<double> params, std::span<const double> grads,
              std::span<double> buffer, double lr, double momentum,
              double weight_decay, std::span<const MaskValue> mask = {},
              MaskValue trainable = 0);

/// Momentum buffers shaped like every trainable parameter group.
class OptimizerState {
 public:
  explicit OptimizerState(const Network& net);

  void apply(Network& net, const NetGrads& grads, double lr, double momentum,
             double weight_decay, MaskValue trainable);

  const std::vector<Tensor2>& weight_buffers() const { return weights_; }

 private:
  std::vector<Tensor2> weights_;
  std::vector<Vector> biases_;
  Affine main_;
  Affine aux_;
};

enum class Objective {
  FineTune,          // plain classification
  SequentialDistill, // penultimate model distills old logits
  MultiModel,        // every previous model distills its own logits, plus aux
};

struct StepObjective {
  Objective kind = Objective::FineTune;
  LossConfig loss;
  // MultiModel: teacher k at index k-1. SequentialDistill: one teacher, the
  // penultimate model.
  std::span<const TeacherModel> teachers;
};

struct BatchLoss {
  double value = 0.0;
  Tensor2 d_main;
  Tensor2 d_aux;
};

// Teacher scores on x for steps 1..P-1, each restricted to its logit range.
TeacherOutputs teacher_outputs(std::span<const TeacherModel> teachers,
                               const Tensor2& x, const ClassBatchLayout& layout);

BatchLoss evaluate_objective(const Network& net, const ForwardTrace& trace,
                             const Tensor2& x, const Tensor2& labels,
                             const StepObjective& objective);

/// Minibatch SGD over one incremental step's training samples.
class StepTrainer {
 public:
  StepTrainer(Network& net, const Dataset& train,
              std::vector<std::size_t> indices, StepObjective objective,
              const TrainConfig& cfg, Rng& rng);

  // One pass in a freshly shuffled order; appends each minibatch loss.
  void run_epoch(double lr, double weight_decay, MaskValue trainable,
                 OptimizerState& opt, std::vector<double>& trace);

  // Objective over all step samples without augmentation or updates.
  double full_loss() const;

  Network& network() { return net_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  Network& net_;
  const Dataset& train_;
  std::vector<std::size_t> indices_;
  StepObjective objective_;
  const TrainConfig& cfg_;
  Rng& rng_;
};

struct StepResult {
  std::vector<double> train_trace;
  std::vector<double> finetune_trace;
  std::vector<std::size_t> frozen_per_layer;
  std::optional<StepSidecar> sidecar;
};

// Main epochs, then prune + fine-tune + snapshot when `prune` is given.
StepResult train_incremental_step(StepTrainer& trainer, int k,
                                  const PruneConfig* prune);

}  // namespace m2kd
