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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "m2kd/masked_store.hpp"

namespace m2kd {

struct StepLog {
  std::vector<double> train_loss;     // one entry per minibatch
  std::vector<double> finetune_loss;  // empty when pruning is off
  std::vector<std::size_t> frozen_per_layer;
  double wall_seconds = 0.0;

  friend bool operator==(const StepLog&, const StepLog&) = default;
};

struct ExperimentReport {
  nlohmann::json config;
  std::string method;
  // Row k (0-based) holds accuracy on each step-j class batch, j <= k.
  std::vector<std::vector<double>> accuracy_matrix;
  // Test samples behind each accuracy_matrix entry.
  std::vector<std::vector<std::size_t>> test_counts;
  // Accuracy on all classes seen after each step.
  std::vector<double> overall_curve;
  std::vector<StepLog> steps;
  // Final-step counts indexed [true][predicted].
  std::vector<std::vector<std::uint64_t>> confusion;
  MemoryReport memory;

  std::size_t num_steps() const { return overall_curve.size(); }
  // Mean of overall_curve.
  double average_accuracy() const;
  double final_accuracy() const;
  // Final-row accuracy over the class batches of steps 1..P-1.
  double old_class_accuracy() const;
};

// Sample-weighted mean of one accuracy row; the definition of overall_curve.
double weighted_accuracy(std::span<const double> accuracy,
                         std::span<const std::size_t> counts);

// Throws if an overall_curve entry disagrees with its accuracy row or the
// confusion matrix does not account for every final test sample.
void check_consistency(const ExperimentReport& report);

nlohmann::json report_to_json(const ExperimentReport& report);

// Writes the JSON report and CSV views into out_dir. store.bin is added when
// a store is given.
void emit(const ExperimentReport& report, const std::filesystem::path& out_dir,
          const ModelStore* store = nullptr);

std::string accuracy_matrix_csv(const ExperimentReport& report);
std::string overall_curve_csv(const ExperimentReport& report);
std::string confusion_csv(const ExperimentReport& report);
std::string memory_text(const MemoryReport& memory);

// Side-by-side overall curves, one column per report, labelled by method.
std::string compare_csv(std::span<const ExperimentReport> reports);

// Rows: prune ratio ("none" when pruning was off); columns: steps.
std::string sweep_table(std::span<const ExperimentReport> reports);

// "RESULT avg_acc=<v> steps=<P> method=<m>"
std::string summary_line(const ExperimentReport& report);

// Parses a numeric CSV with a header row and a leading label column. Empty
// cells become std::nullopt.
std::vector<std::vector<std::optional<double>>> parse_csv_table(const std::string& text);

std::string format_double(double v);

}  // namespace m2kd
