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

// Experiment configuration and its JSON file format. The schema is documented
// in docs/config.md; unknown keys are rejected.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "m2kd/data.hpp"
#include "m2kd/losses.hpp"
#include "m2kd/network.hpp"
#include "m2kd/pruning.hpp"
#include "m2kd/trainer.hpp"

namespace m2kd {

enum class Method { FT, LWF_MC, M2KD, M2KD_NOPRUNE };

Method parse_method(std::string_view name);
std::string_view method_name(Method m);

enum class DatasetKind { Blobs, Idx };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::Blobs;
  BlobParams blobs;
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
};

struct SplitConfig {
  std::size_t classes_per_batch = 2;
  std::uint64_t order_seed = 0;
};

struct ExemplarConfig {
  bool enabled = false;
  std::size_t budget = 0;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  SplitConfig split;
  Method method = Method::M2KD;
  NetConfig net;
  TrainConfig train;
  PruneConfig prune;
  bool prune_enabled = true;
  LossConfig loss;
  ExemplarConfig exemplar;
  std::filesystem::path out_dir = "m2kd_out";
  bool dump_dataset = false;

  void validate() const;
};

// Parses and validates a config document. Relative dataset paths resolve
// against base_dir.
ExperimentConfig parse_config(const nlohmann::json& doc,
                              const std::filesystem::path& base_dir = {});

nlohmann::json read_config_file(const std::filesystem::path& path);
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies a dotted-path assignment such as "train.seed=7". The value is read
// as JSON when it parses, otherwise as a string.
void apply_override(nlohmann::json& doc, std::string_view assignment);

// Fully resolved config, every default spelled out.
nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace m2kd
