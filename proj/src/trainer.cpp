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

#include "m2kd/trainer.hpp"

#include <cmath>
#include <string>

#include "m2kd/error.hpp"
#include "m2kd/pruning.hpp"

namespace m2kd {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr0 > 0.0)) throw ConfigError("train.lr0 must be > 0");
  if (!(lr_decay_factor > 0.0)) throw ConfigError("train.lr_decay_factor must be > 0");
  if (lr_decay_every == 0) throw ConfigError("train.lr_decay_every must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("train.momentum must lie in [0, 1)");
  }
  if (!(weight_decay_first_step >= 0.0)) {
    throw ConfigError("train.weight_decay_first_step must be >= 0");
  }
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  const auto decays = static_cast<double>(epoch / cfg.lr_decay_every);
  return cfg.lr0 / std::pow(cfg.lr_decay_factor, decays);
}

void sgd_step(std::span<double> params, std::span<const double> grads,
              std::span<double> buffer, double lr, double momentum,
              double weight_decay, std::span<const MaskValue> mask,
              MaskValue trainable) {
  if (grads.size() != params.size() || buffer.size() != params.size() ||
      (!mask.empty() && mask.size() != params.size())) {
    throw ShapeError("sgd_step: parameter, gradient, buffer and mask sizes differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!mask.empty() && mask[i] != trainable) continue;
    const double g = grads[i] + weight_decay * params[i];
    buffer[i] = momentum * buffer[i] + g;
    params[i] -= lr * buffer[i];
  }
}

OptimizerState::OptimizerState(const Network& net) {
  for (const auto& layer : net.store().layers()) {
    weights_.emplace_back(layer.in_dim(), layer.out_dim());
  }
  for (const auto& b : net.biases()) biases_.emplace_back(b.size(), 0.0);
  main_.weight = Tensor2(net.main_head().in_dim(), net.main_head().width());
  main_.bias.assign(net.main_head().width(), 0.0);
  aux_.weight = Tensor2(net.aux_head().in_dim(), net.aux_head().width());
  aux_.bias.assign(net.aux_head().width(), 0.0);
}

void OptimizerState::apply(Network& net, const NetGrads& grads, double lr,
                           double momentum, double weight_decay,
                           MaskValue trainable) {
  auto& layers = net.store().layers();
  for (std::size_t n = 0; n < layers.size(); ++n) {
    sgd_step(layers[n].weights.data(), grads.weights[n].data(),
             weights_[n].data(), lr, momentum, weight_decay, layers[n].mask,
             trainable);
    sgd_step(net.biases()[n], grads.biases[n], biases_[n], lr, momentum,
             weight_decay);
  }
  auto head = [&](Affine& p, const Affine& g, Affine& b) {
    sgd_step(p.weight.data(), g.weight.data(), b.weight.data(), lr, momentum,
             weight_decay);
    sgd_step(p.bias, g.bias, b.bias, lr, momentum, weight_decay);
  };
  head(net.main_head(), grads.main_head, main_);
  head(net.aux_head(), grads.aux_head, aux_);
}

TeacherOutputs teacher_outputs(std::span<const TeacherModel> teachers,
                               const Tensor2& x, const ClassBatchLayout& layout) {
  TeacherOutputs out;
  out.reserve(teachers.size());
  for (std::size_t k = 1; k <= teachers.size(); ++k) {
    const TeacherModel& t = teachers[k - 1];
    if (t.width() != layout.boundary(k)) {
      throw ShapeError("teacher " + std::to_string(k) + " has " +
                       std::to_string(t.width()) + " logits, expected " +
                       std::to_string(layout.boundary(k)));
    }
    const ForwardTrace trace = t.forward(x);
    const auto [begin, end] = layout.range(k);
    out.push_back({sigmoid(trace.main_logits.slice_cols(begin, end)),
                   sigmoid(trace.aux_logits.slice_cols(begin, end))});
  }
  return out;
}

BatchLoss evaluate_objective(const Network& net, const ForwardTrace& trace,
                             const Tensor2& x, const Tensor2& labels,
                             const StepObjective& objective) {
  BatchLoss out;
  const std::size_t n = x.rows();
  const std::size_t c = net.classes();
  switch (objective.kind) {
    case Objective::FineTune: {
      LossResult r = loss_ft(trace.main_logits, labels);
      out.value = r.value;
      out.d_main = std::move(r.grad);
      out.d_aux = Tensor2(n, c);
      break;
    }
    case Objective::SequentialDistill: {
      if (objective.teachers.size() > 1) {
        throw Error("sequential distillation takes only the penultimate model");
      }
      Tensor2 scores(n, 0);
      if (!objective.teachers.empty()) {
        scores = sigmoid(objective.teachers.front().forward(x).main_logits);
      }
      LossResult r = loss_d(trace.main_logits, scores, labels, scores.cols());
      out.value = r.value;
      out.d_main = std::move(r.grad);
      out.d_aux = Tensor2(n, c);
      break;
    }
    case Objective::MultiModel: {
      const TeacherOutputs t = teacher_outputs(objective.teachers, x, net.layout());
      const LossResult mmd = loss_mmd(trace.main_logits, t, labels, net.layout());
      const LossResult ad = loss_ad(trace.aux_logits, t, labels, net.layout(),
                                    objective.loss.alpha);
      TotalLoss total = loss_total(mmd, ad, objective.loss.lambda);
      out.value = total.value;
      out.d_main = std::move(total.d_main);
      out.d_aux = std::move(total.d_aux);
      break;
    }
  }
  return out;
}

StepTrainer::StepTrainer(Network& net, const Dataset& train,
                         std::vector<std::size_t> indices, StepObjective objective,
                         const TrainConfig& cfg, Rng& rng)
    : net_(net),
      train_(train),
      indices_(std::move(indices)),
      objective_(objective),
      cfg_(cfg),
      rng_(rng) {
  if (train_.dim() != net_.input_dim()) {
    throw ShapeError("training data has " + std::to_string(train_.dim()) +
                     " features, network expects " +
                     std::to_string(net_.input_dim()));
  }
}

void StepTrainer::run_epoch(double lr, double weight_decay, MaskValue trainable,
                            OptimizerState& opt, std::vector<double>& trace) {
  std::vector<std::size_t> order = indices_;
  rng_.shuffle(std::span<std::size_t>(order));
  for (std::size_t begin = 0; begin < order.size(); begin += cfg_.batch_size) {
    const std::size_t end = std::min(order.size(), begin + cfg_.batch_size);
    const std::span<const std::size_t> idx(order.data() + begin, end - begin);
    Dataset batch = train_.subset(idx);
    if (cfg_.augment && batch.is_image()) {
      hflip(batch.features, batch.height, batch.width, rng_);
    }
    const Tensor2 labels = one_hot(batch.labels, net_.classes());
    const ForwardTrace fwd = net_.forward(batch.features);
    const BatchLoss loss =
        evaluate_objective(net_, fwd, batch.features, labels, objective_);
    const NetGrads grads = net_.backward(fwd, loss.d_main, loss.d_aux, trainable);
    opt.apply(net_, grads, lr, cfg_.momentum, weight_decay, trainable);
    trace.push_back(loss.value);
  }
}

double StepTrainer::full_loss() const {
  const Dataset all = train_.subset(indices_);
  const Tensor2 labels = one_hot(all.labels, net_.classes());
  const ForwardTrace fwd = net_.forward(all.features);
  return evaluate_objective(net_, fwd, all.features, labels, objective_).value;
}

StepResult train_incremental_step(StepTrainer& trainer, int k,
                                  const PruneConfig* prune) {
  const TrainConfig& cfg = trainer.config();
  const double weight_decay = k == 1 ? cfg.weight_decay_first_step : 0.0;
  StepResult result;
  OptimizerState opt(trainer.network());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    trainer.run_epoch(lr_at(epoch, cfg), weight_decay, 0, opt, result.train_trace);
  }
  if (prune != nullptr) {
    PruneOutcome outcome = prune_and_freeze_step(trainer, k, *prune, weight_decay);
    result.frozen_per_layer = std::move(outcome.frozen_per_layer);
    result.finetune_trace = std::move(outcome.finetune_trace);
    result.sidecar = std::move(outcome.sidecar);
  }
  return result;
}

}  // namespace m2kd
