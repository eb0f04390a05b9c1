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

// Sigmoid cross-entropy objectives over logits.
//
// Every loss is the batch mean of a per-sample sum of per-logit binary
// cross-entropies; only the target assigned to each logit differs:
//
//   loss_ft   all logits take the one-hot label.
//   loss_d    logits [0, C_o) take the penultimate model's scores, the rest
//             the label.
//   loss_mmd  logits of step k take the scores of the step-k model, the
//             current step's logits take the label.
//   loss_ad   aux logits of step k take the step-k aux scores, and every aux
//             logit additionally carries alpha times the label term.
//
// Gradients are with respect to logits: (sigmoid(z) - target) / N.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "m2kd/network.hpp"
#include "m2kd/tensor.hpp"

namespace m2kd {

struct LossConfig {
  double alpha = 0.5;
  double lambda = 1.0;

  void validate() const;
};

struct BceTerm {
  double loss;
  double grad;
};

// -[t log s + (1 - t) log(1 - s)], s = sigmoid(z), in a stable fused form.
BceTerm bce_per_logit(double target, double logit);

struct LossResult {
  double value = 0.0;
  Tensor2 grad;  // dL/dlogits
};

/// Sigmoid scores of one previous step's model restricted to that step's
/// logit range.
struct TeacherScores {
  Tensor2 main;  // N x (C_k - C_{k-1})
  Tensor2 aux;
};

// Index k-1 holds the step-k teacher.
using TeacherOutputs = std::vector<TeacherScores>;

Tensor2 one_hot(std::span<const int> labels, std::size_t classes);

LossResult loss_ft(const Tensor2& logits, const Tensor2& labels);

// teacher_scores covers logits [0, old_classes).
LossResult loss_d(const Tensor2& logits, const Tensor2& teacher_scores,
                  const Tensor2& labels, std::size_t old_classes);

// P = teachers.size() + 1 steps; layout must describe exactly P steps.
LossResult loss_mmd(const Tensor2& logits, const TeacherOutputs& teachers,
                    const Tensor2& labels, const ClassBatchLayout& layout);

LossResult loss_ad(const Tensor2& aux_logits, const TeacherOutputs& teachers,
                   const Tensor2& labels, const ClassBatchLayout& layout,
                   double alpha);

struct TotalLoss {
  double value = 0.0;
  Tensor2 d_main;
  Tensor2 d_aux;
};

// mmd + lambda * ad; aux gradients scaled by lambda.
TotalLoss loss_total(const LossResult& mmd, const LossResult& ad, double lambda);

}  // namespace m2kd
