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

#include "m2kd/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "m2kd/error.hpp"

namespace m2kd {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double weighted_accuracy(std::span<const double> accuracy,
                         std::span<const std::size_t> counts) {
  double correct = 0.0;
  std::size_t total = 0;
  for (std::size_t j = 0; j < accuracy.size(); ++j) {
    correct += accuracy[j] * static_cast<double>(counts[j]);
    total += counts[j];
  }
  return total == 0 ? 0.0 : correct / static_cast<double>(total);
}

double ExperimentReport::average_accuracy() const {
  if (overall_curve.empty()) return 0.0;
  double s = 0.0;
  for (double v : overall_curve) s += v;
  return s / static_cast<double>(overall_curve.size());
}

double ExperimentReport::final_accuracy() const {
  return overall_curve.empty() ? 0.0 : overall_curve.back();
}

double ExperimentReport::old_class_accuracy() const {
  if (accuracy_matrix.size() < 2) return 0.0;
  const auto& row = accuracy_matrix.back();
  const auto& counts = test_counts.back();
  return weighted_accuracy(std::span(row).first(row.size() - 1),
                           std::span(counts).first(counts.size() - 1));
}

void check_consistency(const ExperimentReport& r) {
  if (r.accuracy_matrix.size() != r.overall_curve.size() ||
      r.test_counts.size() != r.overall_curve.size()) {
    throw Error("report rows disagree with the number of steps");
  }
  for (std::size_t k = 0; k < r.overall_curve.size(); ++k) {
    if (r.accuracy_matrix[k].size() != k + 1 || r.test_counts[k].size() != k + 1) {
      throw Error("accuracy row " + std::to_string(k + 1) + " is not lower-triangular");
    }
    if (weighted_accuracy(r.accuracy_matrix[k], r.test_counts[k]) !=
        r.overall_curve[k]) {
      throw Error("overall_curve[" + std::to_string(k + 1) +
                  "] is not the weighted mean of its accuracy row");
    }
  }
  if (!r.test_counts.empty()) {
    std::uint64_t expected = 0;
    for (std::size_t c : r.test_counts.back()) expected += c;
    std::uint64_t seen = 0;
    for (const auto& row : r.confusion) {
      for (std::uint64_t v : row) seen += v;
    }
    if (seen != expected) throw Error("confusion counts do not sum to the test-set size");
  }
}

json report_to_json(const ExperimentReport& r) {
  json steps = json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"train_loss", s.train_loss},
                     {"finetune_loss", s.finetune_loss},
                     {"frozen_per_layer", s.frozen_per_layer},
                     {"wall_seconds", s.wall_seconds}});
  }
  const MemoryReport& m = r.memory;
  return {
      {"config", r.config},
      {"method", r.method},
      {"accuracy_matrix", r.accuracy_matrix},
      {"test_counts", r.test_counts},
      {"overall_curve", r.overall_curve},
      {"average_accuracy", r.average_accuracy()},
      {"steps", steps},
      {"confusion", r.confusion},
      {"memory", {{"mask_bytes", m.mask_bytes},
                  {"sidecar_bytes", m.sidecar_bytes},
                  {"masked_total", m.masked_total},
                  {"full_snapshot_bytes", m.full_snapshot_bytes},
                  {"ratio", m.ratio}}},
  };
}

std::string accuracy_matrix_csv(const ExperimentReport& r) {
  const std::size_t p = r.num_steps();
  std::ostringstream out;
  out << "after_step";
  for (std::size_t j = 1; j <= p; ++j) out << ",batch" << j;
  out << '\n';
  for (std::size_t k = 0; k < p; ++k) {
    out << k + 1;
    for (std::size_t j = 0; j < p; ++j) {
      out << ',';
      if (j <= k) out << format_double(r.accuracy_matrix[k][j]);
    }
    out << '\n';
  }
  return out.str();
}

std::string overall_curve_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "step,accuracy\n";
  for (std::size_t k = 0; k < r.num_steps(); ++k) {
    out << k + 1 << ',' << format_double(r.overall_curve[k]) << '\n';
  }
  return out.str();
}

std::string confusion_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "true";
  for (std::size_t c = 0; c < r.confusion.size(); ++c) out << ",pred" << c;
  out << '\n';
  for (std::size_t t = 0; t < r.confusion.size(); ++t) {
    out << t;
    for (std::uint64_t v : r.confusion[t]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

std::string memory_text(const MemoryReport& m) {
  std::ostringstream out;
  out << "mask_bytes " << m.mask_bytes << '\n'
      << "sidecar_bytes " << m.sidecar_bytes << '\n'
      << "masked_total " << m.masked_total << '\n'
      << "full_snapshot_bytes " << m.full_snapshot_bytes << '\n'
      << "ratio " << format_double(m.ratio) << '\n';
  return out.str();
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void emit(const ExperimentReport& report, const std::filesystem::path& out_dir,
          const ModelStore* store) {
  check_consistency(report);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_text(out_dir / "report.json", report_to_json(report).dump(2) + "\n");
  write_text(out_dir / "accuracy_matrix.csv", accuracy_matrix_csv(report));
  write_text(out_dir / "overall_curve.csv", overall_curve_csv(report));
  write_text(out_dir / "confusion.csv", confusion_csv(report));
  write_text(out_dir / "memory.txt", memory_text(report.memory));
  if (store != nullptr) save_store(*store, out_dir / "store.bin");
}

std::string compare_csv(std::span<const ExperimentReport> reports) {
  if (reports.empty()) throw Error("compare needs at least one report");
  const std::size_t p = reports.front().num_steps();
  std::ostringstream out;
  out << "step";
  for (const auto& r : reports) {
    if (r.num_steps() != p) throw Error("compared runs have different step counts");
    out << ',' << r.method;
  }
  out << '\n';
  for (std::size_t k = 0; k < p; ++k) {
    out << k + 1;
    for (const auto& r : reports) out << ',' << format_double(r.overall_curve[k]);
    out << '\n';
  }
  return out.str();
}

std::string sweep_table(std::span<const ExperimentReport> reports) {
  if (reports.empty()) throw Error("sweep table needs at least one report");
  const std::size_t p = reports.front().num_steps();
  std::ostringstream out;
  out << "ratio";
  for (std::size_t k = 1; k <= p; ++k) out << ",step" << k;
  out << '\n';
  for (const auto& r : reports) {
    if (r.num_steps() != p) throw Error("inconsistent step counts in sweep");
    const json& prune = r.config.at("prune");
    if (prune.at("enabled").get<bool>()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", prune.at("ratio").get<double>());
      out << buf;
    } else {
      out << "none";
    }
    for (double v : r.overall_curve) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

std::string summary_line(const ExperimentReport& r) {
  return "RESULT avg_acc=" + format_double(r.average_accuracy()) +
         " steps=" + std::to_string(r.num_steps()) + " method=" + r.method;
}

std::vector<std::vector<std::optional<double>>> parse_csv_table(const std::string& text) {
  std::vector<std::vector<std::optional<double>>> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::optional<double>> row;
    std::size_t start = line.find(',');
    while (start != std::string::npos) {
      const std::size_t next = line.find(',', start + 1);
      const std::string cell = line.substr(start + 1, next - start - 1);
      if (cell.empty()) {
        row.emplace_back(std::nullopt);
      } else {
        row.emplace_back(std::stod(cell));
      }
      start = next;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace m2kd
