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

#include "m2kd/network.hpp"

#include <cmath>
#include <string>

#include "m2kd/error.hpp"

namespace m2kd {

void NetConfig::validate() const {
  if (layer_dims.size() < 3) {
    throw ConfigError("net.layer_dims needs an input and at least two hidden layers");
  }
  for (std::size_t d : layer_dims) {
    if (d == 0) throw ConfigError("net.layer_dims entries must be >= 1");
  }
  if (aux_tap < 1 || aux_tap >= hidden_layers()) {
    throw ConfigError("net.aux_tap must satisfy 1 <= aux_tap < " +
                      std::to_string(hidden_layers()));
  }
}

ClassBatchLayout::ClassBatchLayout(std::vector<std::size_t> boundaries) {
  for (std::size_t b : boundaries) append(b - total());
}

void ClassBatchLayout::append(std::size_t new_classes) {
  if (new_classes == 0) throw Error("a class batch needs at least one class");
  if (boundaries_.size() >= static_cast<std::size_t>(kMaxSteps)) {
    throw Error("more than 255 incremental steps");
  }
  boundaries_.push_back(total() + new_classes);
}

std::size_t ClassBatchLayout::step_of(std::size_t cls) const {
  for (std::size_t k = 0; k < boundaries_.size(); ++k) {
    if (cls < boundaries_[k]) return k + 1;
  }
  throw Error("class " + std::to_string(cls) + " outside layout");
}

namespace {

void fill_normal(std::span<double> values, double stddev, Rng& rng) {
  for (double& v : values) v = rng.normal(0.0, stddev);
}

Affine grow(const Affine& head, std::size_t new_classes, Rng& rng) {
  Affine out;
  const std::size_t old_width = head.width();
  out.weight = Tensor2(head.in_dim(), old_width + new_classes);
  for (std::size_t r = 0; r < head.in_dim(); ++r) {
    for (std::size_t c = 0; c < old_width; ++c) out.weight(r, c) = head.weight(r, c);
    for (std::size_t c = old_width; c < out.width(); ++c) {
      out.weight(r, c) = rng.normal(0.0, kHeadInitStddev);
    }
  }
  out.bias = head.bias;
  for (std::size_t c = 0; c < new_classes; ++c) {
    out.bias.push_back(rng.normal(0.0, kHeadInitStddev));
  }
  return out;
}

}  // namespace

Network::Network(NetConfig cfg, std::size_t first_classes, Rng& rng)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (first_classes == 0) throw Error("first class batch must be non-empty");
  store_ = ModelStore(cfg_.layer_dims, cfg_.aux_tap);
  for (auto& layer : store_.layers()) {
    fill_normal(layer.weights.data(),
                std::sqrt(2.0 / static_cast<double>(layer.in_dim())), rng);
    biases_.emplace_back(layer.out_dim(), 0.0);
  }
  main_head_.weight = Tensor2(cfg_.layer_dims.back(), 0);
  aux_head_.weight = Tensor2(cfg_.layer_dims[cfg_.aux_tap], 0);
  expand_heads(first_classes, rng);
}

void Network::expand_heads(std::size_t new_classes, Rng& rng) {
  if (new_classes == 0) throw Error("expand_heads needs at least one class");
  layout_.append(new_classes);
  main_head_ = grow(main_head_, new_classes, rng);
  aux_head_ = grow(aux_head_, new_classes, rng);
}

MlpView Network::view() const {
  MlpView v;
  for (std::size_t n = 0; n < biases_.size(); ++n) {
    v.weights.push_back(&store_.layers()[n].weights);
    v.biases.push_back(&biases_[n]);
  }
  v.main_head = &main_head_;
  v.aux_head = &aux_head_;
  v.aux_tap = cfg_.aux_tap;
  return v;
}

ForwardTrace Network::forward(const Tensor2& x) const {
  return mlp_forward(x, view());
}

NetGrads Network::backward(const ForwardTrace& trace, const Tensor2& d_main,
                           const Tensor2& d_aux, MaskValue trainable_mask) const {
  if (d_main.cols() != classes() || d_aux.cols() != classes()) {
    throw ShapeError("logit gradients " + shape_string(d_main) + "/" +
                     shape_string(d_aux) + " do not match " +
                     std::to_string(classes()) + " classes");
  }
  NetGrads g = mlp_backward(trace, view(), d_main, d_aux);
  for (std::size_t n = 0; n < g.weights.size(); ++n) {
    const auto& mask = store_.layers()[n].mask;
    auto gw = g.weights[n].data();
    for (std::size_t i = 0; i < gw.size(); ++i) {
      if (mask[i] != trainable_mask) gw[i] = 0.0;
    }
  }
  return g;
}

const StepSidecar& Network::snapshot_sidecar(int k) {
  StepSidecar car;
  car.step = k;
  car.biases = biases_;
  car.main_head = main_head_;
  car.aux_head = aux_head_;
  store_.register_sidecar(std::move(car));
  return store_.sidecar(k);
}

TeacherModel Network::full_copy(int step) const {
  std::vector<Tensor2> weights;
  for (const auto& layer : store_.layers()) weights.push_back(layer.weights);
  return TeacherModel(step, std::move(weights), biases_, main_head_, aux_head_,
                      cfg_.aux_tap);
}

}  // namespace m2kd
