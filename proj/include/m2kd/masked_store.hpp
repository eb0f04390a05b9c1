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

// Shared prunable weights with a per-weight step mask.
//
// A mask value of 0 marks a free weight; a value k >= 1 marks a weight frozen
// at incremental step k. The model of step k uses exactly the weights whose
// mask lies in [1, k], together with the biases and heads saved for step k in
// a sidecar. Because frozen weights never change again, every historical model
// can be rebuilt bit-exactly from the current store.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "m2kd/mlp.hpp"
#include "m2kd/tensor.hpp"

namespace m2kd {

using MaskValue = std::uint8_t;
inline constexpr int kMaxSteps = 255;

struct MaskedLayer {
  Tensor2 weights;  // in_dim x out_dim
  std::vector<MaskValue> mask;

  MaskedLayer() = default;
  MaskedLayer(std::size_t in_dim, std::size_t out_dim)
      : weights(in_dim, out_dim), mask(in_dim * out_dim, 0) {}

  std::size_t in_dim() const { return weights.rows(); }
  std::size_t out_dim() const { return weights.cols(); }
  std::size_t free_count() const;
  std::size_t count_with_mask(MaskValue k) const;

  friend bool operator==(const MaskedLayer&, const MaskedLayer&) = default;
};

// Effective weights of step k: w where 1 <= mask <= k, else 0.
Tensor2 reconstruct_weights(const MaskedLayer& layer, int k);

// Number of free weights a freeze at `prune_ratio` keeps out of `free_count`.
std::size_t keep_count(std::size_t free_count, double prune_ratio);

// Marks the largest-magnitude free weights with step k and zeroes the rest of
// the free pool. Ties are broken by ascending flat index. Returns the number
// of weights marked.
std::size_t freeze_top(MaskedLayer& layer, int k, double prune_ratio);

struct StepSidecar {
  int step = 0;
  std::vector<Vector> biases;
  Affine main_head;
  Affine aux_head;
  // Reserved for per-step parameter groups such as normalization statistics.
  std::vector<Vector> extra_groups;

  std::size_t param_count() const;

  friend bool operator==(const StepSidecar&, const StepSidecar&) = default;
};

/// Immutable, forward-evaluable historical model.
class TeacherModel {
 public:
  TeacherModel(int step, std::vector<Tensor2> weights, std::vector<Vector> biases,
               Affine main_head, Affine aux_head, std::size_t aux_tap);

  int step() const { return step_; }
  std::size_t width() const { return main_head_.width(); }
  std::size_t input_dim() const { return weights_.front().rows(); }

  ForwardTrace forward(const Tensor2& x) const;

  std::size_t param_count() const;

  friend bool operator==(const TeacherModel&, const TeacherModel&) = default;

 private:
  MlpView view() const;

  int step_;
  std::vector<Tensor2> weights_;
  std::vector<Vector> biases_;
  Affine main_head_;
  Affine aux_head_;
  std::size_t aux_tap_;
};

class ModelStore {
 public:
  ModelStore() = default;
  ModelStore(const std::vector<std::size_t>& layer_dims, std::size_t aux_tap);

  std::vector<MaskedLayer>& layers() { return layers_; }
  const std::vector<MaskedLayer>& layers() const { return layers_; }
  const std::map<int, StepSidecar>& sidecars() const { return sidecars_; }
  std::size_t aux_tap() const { return aux_tap_; }

  // Number of steps with a registered sidecar.
  int current_step() const { return static_cast<int>(sidecars_.size()); }
  bool has_sidecar(int k) const { return sidecars_.contains(k); }
  const StepSidecar& sidecar(int k) const;

  // Throws if a sidecar for the same step already exists or the step is not
  // the next one in sequence.
  void register_sidecar(StepSidecar sidecar);

  std::size_t prunable_count() const;

  friend bool operator==(const ModelStore&, const ModelStore&) = default;

 private:
  std::vector<MaskedLayer> layers_;
  std::map<int, StepSidecar> sidecars_;
  std::size_t aux_tap_ = 1;
};

TeacherModel reconstruct_model(const ModelStore& store, int k);

struct MemoryReport {
  std::uint64_t mask_bytes = 0;
  std::uint64_t sidecar_bytes = 0;
  std::uint64_t masked_total = 0;
  std::uint64_t full_snapshot_bytes = 0;
  double ratio = 0.0;  // full_snapshot_bytes / masked_total

  friend bool operator==(const MemoryReport&, const MemoryReport&) = default;
};

// mask: one byte per prunable weight. sidecars: 8 bytes per saved parameter.
// full snapshots: one copy of the current network per step so far, at 8
// bytes per parameter.
MemoryReport memory_report(const ModelStore& store);

// Little-endian binary layout: "M2KD", u32 version, u32 layer count,
// u32 step count, u32 aux tap, per-layer u32 dims, f64 weights, u8 masks,
// then one blob per sidecar.
std::vector<std::uint8_t> serialize_store(const ModelStore& store);
ModelStore deserialize_store(std::span<const std::uint8_t> bytes);
void save_store(const ModelStore& store, const std::filesystem::path& path);
ModelStore load_store(const std::filesystem::path& path);

}  // namespace m2kd
