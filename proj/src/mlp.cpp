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

#include "m2kd/mlp.hpp"

#include "m2kd/error.hpp"

namespace m2kd {

namespace {

Tensor2 affine(const Tensor2& x, const Tensor2& w, const Vector& b) {
  Tensor2 out = matmul(x, w);
  add_row_vector(out, b);
  return out;
}

void check_view(const MlpView& view) {
  if (view.weights.empty() || view.weights.size() != view.biases.size()) {
    throw ShapeError("mlp view needs one bias per hidden layer");
  }
  if (view.main_head == nullptr || view.aux_head == nullptr) {
    throw ShapeError("mlp view is missing a head");
  }
  if (view.aux_tap < 1 || view.aux_tap > view.weights.size()) {
    throw ShapeError("aux tap " + std::to_string(view.aux_tap) +
                     " outside hidden layers");
  }
}

}  // namespace

ForwardTrace mlp_forward(const Tensor2& x, const MlpView& view) {
  check_view(view);
  if (x.cols() != view.weights.front()->rows()) {
    throw ShapeError("input " + shape_string(x) + " does not match first layer " +
                     shape_string(*view.weights.front()));
  }
  ForwardTrace trace;
  trace.aux_tap = view.aux_tap;
  trace.activations.reserve(view.weights.size() + 1);
  trace.activations.push_back(x);
  for (std::size_t n = 0; n < view.weights.size(); ++n) {
    trace.pre.push_back(
        affine(trace.activations.back(), *view.weights[n], *view.biases[n]));
    trace.activations.push_back(relu(trace.pre.back()));
  }
  trace.main_logits = affine(trace.features(), view.main_head->weight,
                             view.main_head->bias);
  trace.aux_logits = affine(trace.tap_features(), view.aux_head->weight,
                            view.aux_head->bias);
  return trace;
}

MlpGrads mlp_backward(const ForwardTrace& trace, const MlpView& view,
                      const Tensor2& d_main, const Tensor2& d_aux) {
  check_view(view);
  const std::size_t layers = view.weights.size();
  MlpGrads g;
  g.weights.resize(layers);
  g.biases.resize(layers);

  g.main_head.weight = matmul_tn(trace.features(), d_main);
  g.main_head.bias = column_sums(d_main);
  g.aux_head.weight = matmul_tn(trace.tap_features(), d_aux);
  g.aux_head.bias = column_sums(d_aux);

  Tensor2 d_act = matmul_nt(d_main, view.main_head->weight);
  for (std::size_t n = layers; n-- > 0;) {
    if (n + 1 == view.aux_tap) {
      const Tensor2 from_aux = matmul_nt(d_aux, view.aux_head->weight);
      auto dst = d_act.data();
      auto src = from_aux.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    const Tensor2 d_pre = relu_backward(trace.pre[n], d_act);
    g.weights[n] = matmul_tn(trace.activations[n], d_pre);
    g.biases[n] = column_sums(d_pre);
    if (n > 0) d_act = matmul_nt(d_pre, *view.weights[n]);
  }
  return g;
}

}  // namespace m2kd
