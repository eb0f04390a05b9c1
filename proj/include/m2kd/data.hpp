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
#include <span>
#include <vector>

#include "m2kd/network.hpp"
#include "m2kd/rng.hpp"
#include "m2kd/tensor.hpp"

namespace m2kd {

struct Dataset {
  Tensor2 features;         // N x D
  std::vector<int> labels;  // N
  std::size_t n_classes = 0;
  // Zero for tabular data; image dimensions otherwise (D == height * width).
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  bool is_image() const { return height > 0 && width > 0; }

  void validate() const;
  // Rows selected by `indices`, in that order.
  Dataset subset(std::span<const std::size_t> indices) const;
  // Indices of samples whose label lies in [lo, hi).
  std::vector<std::size_t> indices_in_classes(std::size_t lo, std::size_t hi) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct BlobParams {
  std::uint64_t seed = 0;
  std::size_t n_classes = 10;
  std::size_t dim = 8;
  std::size_t per_class_train = 100;
  std::size_t per_class_test = 50;
  double center_scale = 1.0;
  double noise_sigma = 1.0;
};

struct TrainTest {
  Dataset train;
  Dataset test;
};

// Centers ~ N(0, center_scale^2 I); samples = center + N(0, noise_sigma^2 I).
TrainTest gen_blobs(const BlobParams& params);

// Big-endian IDX: images magic 0x00000803, labels magic 0x00000801.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);
Dataset parse_idx(std::span<const std::uint8_t> images,
                  std::span<const std::uint8_t> labels);
// Writes an image dataset back to IDX; pixels are rounded from [0,1] to bytes.
void write_idx(const Dataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

void write_csv(const Dataset& data, const std::filesystem::path& path);

struct ClassSplit {
  ClassBatchLayout layout;
  std::vector<int> to_remapped;  // original class -> remapped class
  std::vector<int> to_original;  // remapped class -> original class

  Dataset remap(const Dataset& data) const;
};

ClassSplit split_class_batches(std::size_t n_classes, std::size_t batch,
                               std::uint64_t order_seed);

// Mirrors each image sample across its vertical axis with probability p.
// Tabular batches pass through unchanged without consuming randomness.
void hflip(Tensor2& batch, std::size_t height, std::size_t width, Rng& rng,
           double p = 0.5);

}  // namespace m2kd
