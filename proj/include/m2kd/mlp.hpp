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

// Forward and backward rules for the rectifier MLP with a main and an
// auxiliary classifier head. Both the live network and reconstructed teacher
// models evaluate through mlp_forward, so identical parameter values produce
// bit-identical logits regardless of where the parameters came from.

#pragma once

#include <cstddef>
#include <vector>

#include "m2kd/tensor.hpp"

namespace m2kd {

/// Affine map: logits = features * weight + bias, weight is in x out.
struct Affine {
  Tensor2 weight;
  Vector bias;

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t width() const { return weight.cols(); }
  std::size_t param_count() const { return weight.size() + bias.size(); }

  friend bool operator==(const Affine&, const Affine&) = default;
};

/// Non-owning view of all parameters needed for one forward pass.
struct MlpView {
  std::vector<const Tensor2*> weights;  // hidden layer n: in_dim x out_dim
  std::vector<const Vector*> biases;
  const Affine* main_head = nullptr;
  const Affine* aux_head = nullptr;
  std::size_t aux_tap = 1;  // 1-based hidden layer feeding the aux head
};

struct ForwardTrace {
  // activations[0] is the input; activations[n] = relu(pre[n-1]).
  std::vector<Tensor2> pre;
  std::vector<Tensor2> activations;
  Tensor2 main_logits;
  Tensor2 aux_logits;
  std::size_t aux_tap = 1;

  const Tensor2& features() const { return activations.back(); }
  const Tensor2& tap_features() const { return activations[aux_tap]; }
};

struct MlpGrads {
  std::vector<Tensor2> weights;
  std::vector<Vector> biases;
  Affine main_head;
  Affine aux_head;
};

ForwardTrace mlp_forward(const Tensor2& x, const MlpView& view);

// Reverse pass through both heads and all hidden layers. No masking.
MlpGrads mlp_backward(const ForwardTrace& trace, const MlpView& view,
                      const Tensor2& d_main, const Tensor2& d_aux);

}  // namespace m2kd
