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

#include "m2kd/protocol.hpp"

#include <chrono>
#include <string>

#include "m2kd/error.hpp"
#include "m2kd/pruning.hpp"
#include "m2kd/trainer.hpp"

namespace m2kd {

void MaskedReconstruction::record(const Network& net, int k) {
  if (&net != &net_ || !net.store().has_sidecar(k)) {
    throw Error("masked reconstruction needs the step " + std::to_string(k) +
                " sidecar in the live store");
  }
}

TeacherModel MaskedReconstruction::get_teacher(int k) const {
  return reconstruct_model(net_.store(), k);
}

void FullSnapshot::record(const Network& net, int k) {
  if (snapshots_.contains(k)) {
    throw Error("snapshot for step " + std::to_string(k) + " already exists");
  }
  snapshots_.emplace(k, net.full_copy(k));
}

TeacherModel FullSnapshot::get_teacher(int k) const {
  auto it = snapshots_.find(k);
  if (it == snapshots_.end()) {
    throw Error("no snapshot for step " + std::to_string(k));
  }
  return it->second;
}

std::size_t FullSnapshot::stored_params() const {
  std::size_t n = 0;
  for (const auto& [k, t] : snapshots_) n += t.param_count();
  return n;
}

std::unique_ptr<TeacherProvider> make_provider(Method method, const Network& net) {
  if (method == Method::M2KD) return std::make_unique<MaskedReconstruction>(net);
  return std::make_unique<FullSnapshot>();
}

std::vector<std::size_t> herding_select(const Tensor2& features, std::size_t m) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (n == 0) throw Error("herding_select: empty class");
  if (m > n) throw Error("herding_select: asked for more exemplars than samples");

  Vector mean = column_sums(features);
  for (double& v : mean) v /= static_cast<double>(n);

  Vector running(d, 0.0);
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> picks;
  picks.reserve(m);
  for (std::size_t t = 0; t < m; ++t) {
    const double denom = static_cast<double>(t + 1);
    std::size_t best = n;
    double best_dist = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      auto f = features.row(i);
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = mean[j] - (running[j] + f[j]) / denom;
        dist += diff * diff;
      }
      if (best == n || dist < best_dist) {
        best = i;
        best_dist = dist;
      }
    }
    taken[best] = true;
    picks.push_back(best);
    auto f = features.row(best);
    for (std::size_t j = 0; j < d; ++j) running[j] += f[j];
  }
  return picks;
}

std::size_t ExemplarSet::total() const {
  std::size_t n = 0;
  for (const auto& [c, idx] : per_class) n += idx.size();
  return n;
}

std::vector<std::size_t> ExemplarSet::all_indices() const {
  std::vector<std::size_t> out;
  for (const auto& [c, idx] : per_class) out.insert(out.end(), idx.begin(), idx.end());
  return out;
}

Evaluation evaluate(const Tensor2& logits, std::span<const int> labels,
                    const ClassBatchLayout& layout) {
  const std::size_t c = layout.total();
  if (logits.rows() != labels.size() || logits.cols() != c) {
    throw ShapeError("evaluate: logits " + shape_string(logits) + " vs " +
                     std::to_string(labels.size()) + " labels and " +
                     std::to_string(c) + " classes");
  }
  Evaluation e;
  e.confusion.assign(c, std::vector<std::uint64_t>(c, 0));
  std::vector<std::size_t> correct(layout.steps(), 0);
  e.step_counts.assign(layout.steps(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto truth = static_cast<std::size_t>(labels[i]);
    if (truth >= c) throw ShapeError("test label outside seen classes");
    const std::size_t pred = argmax(logits.row(i));
    ++e.confusion[truth][pred];
    const std::size_t step = layout.step_of(truth) - 1;
    ++e.step_counts[step];
    if (pred == truth) ++correct[step];
  }
  for (std::size_t s = 0; s < layout.steps(); ++s) {
    e.step_accuracy.push_back(
        e.step_counts[s] == 0
            ? 0.0
            : static_cast<double>(correct[s]) / static_cast<double>(e.step_counts[s]));
  }
  e.overall = weighted_accuracy(e.step_accuracy, e.step_counts);
  return e;
}

Evaluation evaluate(const Network& net, const Dataset& test) {
  const auto idx = test.indices_in_classes(0, net.classes());
  const Dataset seen = test.subset(idx);
  return evaluate(net.forward(seen.features).main_logits, seen.labels, net.layout());
}

TrainTest load_datasets(const ExperimentConfig& cfg) {
  TrainTest tt;
  if (cfg.dataset.kind == DatasetKind::Blobs) {
    tt = gen_blobs(cfg.dataset.blobs);
  } else {
    tt.train = load_idx(cfg.dataset.train_images, cfg.dataset.train_labels);
    tt.test = load_idx(cfg.dataset.test_images, cfg.dataset.test_labels);
    const std::size_t n = std::max(tt.train.n_classes, tt.test.n_classes);
    tt.train.n_classes = n;
    tt.test.n_classes = n;
  }
  tt.train.validate();
  tt.test.validate();
  if (tt.train.dim() != cfg.net.layer_dims.front()) {
    throw ConfigError("dataset has " + std::to_string(tt.train.dim()) +
                      " features but net.layer_dims[0] is " +
                      std::to_string(cfg.net.layer_dims.front()));
  }
  return tt;
}

namespace {

Objective objective_for(Method m) {
  switch (m) {
    case Method::FT: return Objective::FineTune;
    case Method::LWF_MC: return Objective::SequentialDistill;
    case Method::M2KD:
    case Method::M2KD_NOPRUNE: return Objective::MultiModel;
  }
  return Objective::FineTune;
}

void update_exemplars(ExemplarSet& ex, const Network& net, const Dataset& train,
                      std::size_t lo, std::size_t hi) {
  const std::size_t quota = ex.budget / net.classes();
  for (auto& [c, idx] : ex.per_class) {
    if (idx.size() > quota) idx.resize(quota);
  }
  for (std::size_t c = lo; c < hi; ++c) {
    const auto idx = train.indices_in_classes(c, c + 1);
    if (idx.empty()) throw Error("class " + std::to_string(c) + " has no training samples");
    const std::size_t m = std::min(quota, idx.size());
    auto& slot = ex.per_class[static_cast<int>(c)];
    slot.clear();
    if (m == 0) continue;
    const Tensor2 features = net.forward(train.subset(idx).features).features();
    for (std::size_t pick : herding_select(features, m)) slot.push_back(idx[pick]);
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const ExperimentHooks& hooks) {
  cfg.validate();
  TrainTest raw = load_datasets(cfg);
  const ClassSplit split = split_class_batches(
      raw.train.n_classes, cfg.split.classes_per_batch, cfg.split.order_seed);
  const Dataset train = split.remap(raw.train);
  const Dataset test = split.remap(raw.test);
  if (cfg.dump_dataset) {
    std::filesystem::create_directories(cfg.out_dir);
    write_csv(train, cfg.out_dir / "train.csv");
    write_csv(test, cfg.out_dir / "test.csv");
  }

  const ClassBatchLayout& plan = split.layout;
  Rng net_rng(cfg.net.seed);
  Rng train_rng(cfg.train.seed);
  Network net(cfg.net, plan.boundary(1), net_rng);
  const auto provider = make_provider(cfg.method, net);
  const bool masked = cfg.prune_enabled &&
                      (cfg.method == Method::M2KD || cfg.method == Method::M2KD_NOPRUNE);
  ExemplarSet exemplars{cfg.exemplar.enabled ? cfg.exemplar.budget : 0, {}};

  ExperimentReport report;
  report.config = to_json(cfg);
  report.method = std::string(method_name(cfg.method));
  Evaluation last;

  for (std::size_t k = 1; k <= plan.steps(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    if (k > 1) net.expand_heads(plan.boundary(k) - plan.boundary(k - 1), net_rng);
    const auto [lo, hi] = plan.range(k);
    std::vector<std::size_t> indices = train.indices_in_classes(lo, hi);
    const auto stored = exemplars.all_indices();
    indices.insert(indices.end(), stored.begin(), stored.end());

    std::vector<TeacherModel> teachers;
    StepObjective objective;
    objective.kind = objective_for(cfg.method);
    objective.loss = cfg.loss;
    if (objective.kind == Objective::MultiModel) {
      for (std::size_t j = 1; j < k; ++j) {
        teachers.push_back(provider->get_teacher(static_cast<int>(j)));
      }
    } else if (objective.kind == Objective::SequentialDistill && k > 1) {
      teachers.push_back(provider->get_teacher(static_cast<int>(k - 1)));
    }
    objective.teachers = teachers;

    StepTrainer trainer(net, train, std::move(indices), objective, cfg.train, train_rng);
    StepResult step = train_incremental_step(trainer, static_cast<int>(k),
                                             masked ? &cfg.prune : nullptr);
    provider->record(net, static_cast<int>(k));
    if (hooks.after_step) hooks.after_step(net, static_cast<int>(k));

    last = evaluate(net, test);
    report.accuracy_matrix.push_back(last.step_accuracy);
    report.test_counts.push_back(last.step_counts);
    report.overall_curve.push_back(last.overall);

    if (exemplars.budget > 0) update_exemplars(exemplars, net, train, lo, hi);

    StepLog log;
    log.train_loss = std::move(step.train_trace);
    log.finetune_loss = std::move(step.finetune_trace);
    log.frozen_per_layer = std::move(step.frozen_per_layer);
    log.wall_seconds = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - t0).count();
    report.steps.push_back(std::move(log));
  }
  report.confusion = last.confusion;
  report.memory = memory_report(net.store());
  check_consistency(report);
  return {std::move(report), net.store()};
}

}  // namespace m2kd
