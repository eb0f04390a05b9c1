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
#include <utility>
#include <vector>

#include "m2kd/masked_store.hpp"
#include "m2kd/mlp.hpp"
#include "m2kd/rng.hpp"
#include "m2kd/tensor.hpp"

namespace m2kd {

struct NetConfig {
  std::vector<std::size_t> layer_dims;  // input, hidden..., feature dim
  std::size_t aux_tap = 1;              // 1-based hidden layer for the aux head
  std::uint64_t seed = 0;

  std::size_t hidden_layers() const {
    return layer_dims.empty() ? 0 : layer_dims.size() - 1;
  }
  void validate() const;

  // Middle hidden layer, the default tap point.
  static std::size_t default_aux_tap(std::size_t hidden_layers) {
    return hidden_layers / 2 == 0 ? 1 : hidden_layers / 2;
  }
};

/// Cumulative class counts C_1 < C_2 < ... < C_P.
class ClassBatchLayout {
 public:
  ClassBatchLayout() = default;
  explicit ClassBatchLayout(std::vector<std::size_t> boundaries);

  void append(std::size_t new_classes);

  std::size_t steps() const { return boundaries_.size(); }
  std::size_t total() const { return boundaries_.empty() ? 0 : boundaries_.back(); }
  // Class count after step k (1-based); C_0 = 0.
  std::size_t boundary(std::size_t k) const {
    return k == 0 ? 0 : boundaries_.at(k - 1);
  }
  // Zero-based logit range [begin, end) owned by step k.
  std::pair<std::size_t, std::size_t> range(std::size_t k) const {
    return {boundary(k - 1), boundary(k)};
  }
  // 1-based step owning class c.
  std::size_t step_of(std::size_t cls) const;

  const std::vector<std::size_t>& boundaries() const { return boundaries_; }

  friend bool operator==(const ClassBatchLayout&, const ClassBatchLayout&) = default;

 private:
  std::vector<std::size_t> boundaries_;
};

/// Gradients for every trainable group, shaped like the parameters.
using NetGrads = MlpGrads;

/// The live incremental classifier. Hidden weights live in the masked store;
/// biases and both heads are live copies that get saved per step.
class Network {
 public:
  // Draws hidden weights ~ N(0, 2/in_dim) and head entries ~ N(0, 0.01^2).
  Network(NetConfig cfg, std::size_t first_classes, Rng& rng);

  const NetConfig& config() const { return cfg_; }
  const ClassBatchLayout& layout() const { return layout_; }
  std::size_t classes() const { return layout_.total(); }
  std::size_t input_dim() const { return cfg_.layer_dims.front(); }

  ModelStore& store() { return store_; }
  const ModelStore& store() const { return store_; }
  std::vector<Vector>& biases() { return biases_; }
  const std::vector<Vector>& biases() const { return biases_; }
  Affine& main_head() { return main_head_; }
  const Affine& main_head() const { return main_head_; }
  Affine& aux_head() { return aux_head_; }
  const Affine& aux_head() const { return aux_head_; }

  // Appends new_classes columns to both heads and a boundary to the layout.
  void expand_heads(std::size_t new_classes, Rng& rng);

  ForwardTrace forward(const Tensor2& x) const;

  // Reverse pass. Hidden-weight gradients are zeroed wherever the mask does
  // not equal `trainable_mask`: 0 during main training, k during step k's
  // fine-tune.
  NetGrads backward(const ForwardTrace& trace, const Tensor2& d_main,
                    const Tensor2& d_aux, MaskValue trainable_mask = 0) const;

  // Deep-copies biases and heads into the store under step k.
  const StepSidecar& snapshot_sidecar(int k);

  // Full deep copy of the live parameters.
  TeacherModel full_copy(int step) const;

 private:
  MlpView view() const;

  NetConfig cfg_;
  ModelStore store_;
  std::vector<Vector> biases_;
  Affine main_head_;
  Affine aux_head_;
  ClassBatchLayout layout_;
};

inline constexpr double kHeadInitStddev = 0.01;

}  // namespace m2kd
