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
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "m2kd/config.hpp"
#include "m2kd/data.hpp"
#include "m2kd/masked_store.hpp"
#include "m2kd/network.hpp"
#include "m2kd/report.hpp"

namespace m2kd {

/// Source of historical models for distillation.
class TeacherProvider {
 public:
  virtual ~TeacherProvider() = default;
  // Called once the live network has finished step k.
  virtual void record(const Network& net, int k) = 0;
  virtual TeacherModel get_teacher(int k) const = 0;
};

/// Rebuilds step-k models from the masked store on demand.
class MaskedReconstruction final : public TeacherProvider {
 public:
  explicit MaskedReconstruction(const Network& net) : net_(net) {}
  void record(const Network& net, int k) override;
  TeacherModel get_teacher(int k) const override;

 private:
  const Network& net_;
};

/// Keeps a full deep copy of the network after every step.
class FullSnapshot final : public TeacherProvider {
 public:
  void record(const Network& net, int k) override;
  TeacherModel get_teacher(int k) const override;
  std::size_t stored_params() const;

 private:
  std::map<int, TeacherModel> snapshots_;
};

std::unique_ptr<TeacherProvider> make_provider(Method method, const Network& net);

// Greedy herding: repeatedly picks the sample that brings the running mean of
// the selection closest to the class mean. Returns indices in pick order.
std::vector<std::size_t> herding_select(const Tensor2& features, std::size_t m);

struct ExemplarSet {
  std::size_t budget = 0;
  std::map<int, std::vector<std::size_t>> per_class;  // class -> train indices

  std::size_t total() const;
  std::vector<std::size_t> all_indices() const;
};

struct Evaluation {
  std::vector<double> step_accuracy;
  std::vector<std::size_t> step_counts;
  double overall = 0.0;
  std::vector<std::vector<std::uint64_t>> confusion;  // C x C
};

// Predictions are argmax over main logits, ties to the lowest class.
Evaluation evaluate(const Tensor2& logits, std::span<const int> labels,
                    const ClassBatchLayout& layout);
// Evaluates the live network on the test samples of classes it has seen.
Evaluation evaluate(const Network& net, const Dataset& test);

struct ExperimentHooks {
  // Runs after step k's snapshot and before evaluation.
  std::function<void(const Network&, int)> after_step;
};

struct ExperimentResult {
  ExperimentReport report;
  ModelStore store;
};

// Datasets come from cfg.dataset; labels are remapped into class-batch order.
TrainTest load_datasets(const ExperimentConfig& cfg);

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const ExperimentHooks& hooks = {});

}  // namespace m2kd
