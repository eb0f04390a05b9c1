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

#include "m2kd/losses.hpp"

#include <cmath>
#include <string>

#include "m2kd/error.hpp"

namespace m2kd {

void LossConfig::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("loss.alpha must be >= 0");
  if (!(lambda >= 0.0)) throw ConfigError("loss.lambda must be >= 0");
}

BceTerm bce_per_logit(double target, double logit) {
  const double loss = std::max(logit, 0.0) - logit * target +
                      std::log1p(std::exp(-std::fabs(logit)));
  return {loss, sigmoid(logit) - target};
}

Tensor2 one_hot(std::span<const int> labels, std::size_t classes) {
  Tensor2 y(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ShapeError("label " + std::to_string(labels[i]) + " outside " +
                       std::to_string(classes) + " classes");
    }
    y(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return y;
}

namespace {

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

// Mean over samples of sum_j bce(targets_ij, logits_ij). Per-sample sums run
// j ascending; the batch mean uses pairwise summation.
LossResult sigmoid_cross_entropy(const Tensor2& logits, const Tensor2& targets) {
  require_same_shape(logits, targets, "targets");
  const std::size_t n = logits.rows();
  LossResult r;
  r.grad = Tensor2(n, logits.cols());
  if (n == 0) return r;
  const double inv_n = 1.0 / static_cast<double>(n);
  Vector per_sample(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) {
      const BceTerm t = bce_per_logit(targets(i, j), logits(i, j));
      acc += t.loss;
      r.grad(i, j) = t.grad * inv_n;
    }
    per_sample[i] = acc;
  }
  r.value = pairwise_sum(per_sample) / static_cast<double>(n);
  return r;
}

// Builds the target matrix shared by loss_d and loss_mmd: teacher scores on
// old ranges, labels elsewhere.
void place_scores(Tensor2& targets, const Tensor2& scores, std::size_t begin) {
  for (std::size_t i = 0; i < targets.rows(); ++i) {
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      targets(i, begin + j) = scores(i, j);
    }
  }
}

void check_teachers(const Tensor2& logits, const TeacherOutputs& teachers,
                    const ClassBatchLayout& layout, bool aux) {
  if (layout.steps() != teachers.size() + 1) {
    throw ShapeError("layout has " + std::to_string(layout.steps()) +
                     " steps but " + std::to_string(teachers.size()) +
                     " teachers were supplied; missing teacher step");
  }
  if (layout.total() != logits.cols()) {
    throw ShapeError("layout covers " + std::to_string(layout.total()) +
                     " classes, logits have " + std::to_string(logits.cols()));
  }
  for (std::size_t k = 1; k <= teachers.size(); ++k) {
    const Tensor2& s = aux ? teachers[k - 1].aux : teachers[k - 1].main;
    const auto [begin, end] = layout.range(k);
    if (s.rows() != logits.rows() || s.cols() != end - begin) {
      throw ShapeError("teacher " + std::to_string(k) + " scores " +
                       shape_string(s) + " do not match step range width " +
                       std::to_string(end - begin));
    }
  }
}

}  // namespace

LossResult loss_ft(const Tensor2& logits, const Tensor2& labels) {
  return sigmoid_cross_entropy(logits, labels);
}

LossResult loss_d(const Tensor2& logits, const Tensor2& teacher_scores,
                  const Tensor2& labels, std::size_t old_classes) {
  require_same_shape(logits, labels, "labels");
  if (teacher_scores.rows() != logits.rows() ||
      teacher_scores.cols() != old_classes || old_classes > logits.cols()) {
    throw ShapeError("teacher scores " + shape_string(teacher_scores) +
                     " do not cover " + std::to_string(old_classes) +
                     " old classes of " + shape_string(logits));
  }
  Tensor2 targets = labels;
  place_scores(targets, teacher_scores, 0);
  return sigmoid_cross_entropy(logits, targets);
}

LossResult loss_mmd(const Tensor2& logits, const TeacherOutputs& teachers,
                    const Tensor2& labels, const ClassBatchLayout& layout) {
  require_same_shape(logits, labels, "labels");
  check_teachers(logits, teachers, layout, false);
  Tensor2 targets = labels;
  for (std::size_t k = 1; k <= teachers.size(); ++k) {
    place_scores(targets, teachers[k - 1].main, layout.range(k).first);
  }
  return sigmoid_cross_entropy(logits, targets);
}

LossResult loss_ad(const Tensor2& aux_logits, const TeacherOutputs& teachers,
                   const Tensor2& labels, const ClassBatchLayout& layout,
                   double alpha) {
  require_same_shape(aux_logits, labels, "labels");
  check_teachers(aux_logits, teachers, layout, true);
  const std::size_t n = aux_logits.rows();
  const std::size_t c = aux_logits.cols();
  const std::size_t old = layout.boundary(teachers.size());
  LossResult r;
  r.grad = Tensor2(n, c);
  if (n == 0) return r;

  Tensor2 distill_targets(n, old);
  for (std::size_t k = 1; k <= teachers.size(); ++k) {
    place_scores(distill_targets, teachers[k - 1].aux, layout.range(k).first);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  Vector per_sample(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double distill = 0.0;
    double classify = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const BceTerm cls = bce_per_logit(labels(i, j), aux_logits(i, j));
      classify += cls.loss;
      double g = alpha * cls.grad;
      if (j < old) {
        const BceTerm d = bce_per_logit(distill_targets(i, j), aux_logits(i, j));
        distill += d.loss;
        g = d.grad + g;
      }
      r.grad(i, j) = g * inv_n;
    }
    per_sample[i] = distill + alpha * classify;
  }
  r.value = pairwise_sum(per_sample) / static_cast<double>(n);
  return r;
}

TotalLoss loss_total(const LossResult& mmd, const LossResult& ad, double lambda) {
  TotalLoss t;
  t.value = mmd.value + lambda * ad.value;
  t.d_main = mmd.grad;
  t.d_aux = ad.grad;
  for (double& g : t.d_aux.data()) g *= lambda;
  return t;
}

}  // namespace m2kd
