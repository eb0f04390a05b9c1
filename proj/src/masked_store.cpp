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

#include "m2kd/masked_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "m2kd/error.hpp"

namespace m2kd {

std::size_t MaskedLayer::free_count() const { return count_with_mask(0); }

std::size_t MaskedLayer::count_with_mask(MaskValue k) const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), k));
}

Tensor2 reconstruct_weights(const MaskedLayer& layer, int k) {
  Tensor2 out(layer.in_dim(), layer.out_dim());
  auto src = layer.weights.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const int m = layer.mask[i];
    dst[i] = (m >= 1 && m <= k) ? src[i] : 0.0;
  }
  return out;
}

std::size_t keep_count(std::size_t free_count, double prune_ratio) {
  // Snap products like (1 - 0.8) * 205 = 40.999... to the intended integer.
  const double x = (1.0 - prune_ratio) * static_cast<double>(free_count);
  const double nearest = std::round(x);
  const double v = std::fabs(x - nearest) <= 1e-9 * std::max(1.0, x) ? nearest : std::floor(x);
  return std::max<std::size_t>(1, static_cast<std::size_t>(v));
}

std::size_t freeze_top(MaskedLayer& layer, int k, double prune_ratio) {
  if (k < 1 || k > kMaxSteps) {
    throw Error("freeze step " + std::to_string(k) + " outside [1, 255]");
  }
  if (!(prune_ratio > 0.0 && prune_ratio < 1.0)) {
    throw Error("prune ratio must lie in (0, 1)");
  }
  const auto step = static_cast<MaskValue>(k);
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < layer.mask.size(); ++i) {
    if (layer.mask[i] == step) {
      throw Error("step " + std::to_string(k) + " already used in layer mask");
    }
    if (layer.mask[i] == 0) free.push_back(i);
  }
  if (free.empty()) {
    throw StoreExhausted("store exhausted at step " + std::to_string(k));
  }
  const std::size_t keep = keep_count(free.size(), prune_ratio);
  auto w = layer.weights.data();
  std::stable_sort(free.begin(), free.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(w[a]) > std::fabs(w[b]);
  });
  for (std::size_t r = 0; r < free.size(); ++r) {
    if (r < keep) {
      layer.mask[free[r]] = step;
    } else {
      w[free[r]] = 0.0;
    }
  }
  return keep;
}

std::size_t StepSidecar::param_count() const {
  std::size_t n = main_head.param_count() + aux_head.param_count();
  for (const auto& b : biases) n += b.size();
  for (const auto& g : extra_groups) n += g.size();
  return n;
}

TeacherModel::TeacherModel(int step, std::vector<Tensor2> weights,
                           std::vector<Vector> biases, Affine main_head,
                           Affine aux_head, std::size_t aux_tap)
    : step_(step),
      weights_(std::move(weights)),
      biases_(std::move(biases)),
      main_head_(std::move(main_head)),
      aux_head_(std::move(aux_head)),
      aux_tap_(aux_tap) {
  if (weights_.empty() || weights_.size() != biases_.size()) {
    throw ShapeError("teacher model needs one bias per hidden layer");
  }
}

MlpView TeacherModel::view() const {
  MlpView v;
  for (std::size_t n = 0; n < weights_.size(); ++n) {
    v.weights.push_back(&weights_[n]);
    v.biases.push_back(&biases_[n]);
  }
  v.main_head = &main_head_;
  v.aux_head = &aux_head_;
  v.aux_tap = aux_tap_;
  return v;
}

ForwardTrace TeacherModel::forward(const Tensor2& x) const {
  return mlp_forward(x, view());
}

std::size_t TeacherModel::param_count() const {
  std::size_t n = main_head_.param_count() + aux_head_.param_count();
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    n += weights_[i].size() + biases_[i].size();
  }
  return n;
}

ModelStore::ModelStore(const std::vector<std::size_t>& layer_dims,
                       std::size_t aux_tap)
    : aux_tap_(aux_tap) {
  for (std::size_t n = 1; n < layer_dims.size(); ++n) {
    layers_.emplace_back(layer_dims[n - 1], layer_dims[n]);
  }
}

const StepSidecar& ModelStore::sidecar(int k) const {
  auto it = sidecars_.find(k);
  if (it == sidecars_.end()) {
    throw Error("no sidecar for step " + std::to_string(k));
  }
  return it->second;
}

void ModelStore::register_sidecar(StepSidecar sidecar) {
  const int k = sidecar.step;
  if (sidecars_.contains(k)) {
    throw Error("sidecar for step " + std::to_string(k) + " already exists");
  }
  if (k != current_step() + 1) {
    throw Error("sidecar step " + std::to_string(k) + " out of sequence");
  }
  if (sidecar.biases.size() != layers_.size()) {
    throw ShapeError("sidecar bias count does not match layer count");
  }
  sidecars_.emplace(k, std::move(sidecar));
}

std::size_t ModelStore::prunable_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size();
  return n;
}

TeacherModel reconstruct_model(const ModelStore& store, int k) {
  const StepSidecar& car = store.sidecar(k);
  std::vector<Tensor2> weights;
  weights.reserve(store.layers().size());
  for (const auto& layer : store.layers()) {
    weights.push_back(reconstruct_weights(layer, k));
  }
  return TeacherModel(k, std::move(weights), car.biases, car.main_head,
                      car.aux_head, store.aux_tap());
}

MemoryReport memory_report(const ModelStore& store) {
  MemoryReport r;
  const std::uint64_t prunable = store.prunable_count();
  r.mask_bytes = prunable;
  for (const auto& [k, car] : store.sidecars()) {
    r.sidecar_bytes += 8ULL * car.param_count();
  }
  if (!store.sidecars().empty()) {
    // Every step keeps a copy of the network at its current size.
    const std::uint64_t total_params = prunable + store.sidecars().rbegin()->second.param_count();
    r.full_snapshot_bytes = 8ULL * store.sidecars().size() * total_params;
  }
  r.masked_total = r.mask_bytes + r.sidecar_bytes;
  r.ratio = r.masked_total == 0
                ? 0.0
                : static_cast<double>(r.full_snapshot_bytes) /
                      static_cast<double>(r.masked_total);
  return r;
}

// --- serialization ---------------------------------------------------------

namespace {

constexpr std::uint32_t kStoreVersion = 1;
constexpr char kMagic[4] = {'M', '2', 'K', 'D'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void vec(const Vector& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (double x : v) f64(x);
  }
  void tensor(const Tensor2& t) {
    u32(static_cast<std::uint32_t>(t.rows()));
    u32(static_cast<std::uint32_t>(t.cols()));
    for (double x : t.data()) f64(x);
  }
  void affine(const Affine& a) {
    tensor(a.weight);
    vec(a.bias);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

  std::span<const std::uint8_t> take(std::size_t n) {
    if (in_.size() - pos_ < n) {
      throw FormatError("store truncated at offset " + std::to_string(pos_));
    }
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Vector vec() {
    Vector v(u32());
    for (double& x : v) x = f64();
    return v;
  }
  Tensor2 tensor() {
    const std::size_t r = u32();
    const std::size_t c = u32();
    Tensor2 t(r, c);
    for (double& x : t.data()) x = f64();
    return t;
  }
  Affine affine() {
    Affine a;
    a.weight = tensor();
    a.bias = vec();
    return a;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_store(const ModelStore& store) {
  Writer w;
  w.bytes({reinterpret_cast<const std::uint8_t*>(kMagic), 4});
  w.u32(kStoreVersion);
  w.u32(static_cast<std::uint32_t>(store.layers().size()));
  w.u32(static_cast<std::uint32_t>(store.sidecars().size()));
  w.u32(static_cast<std::uint32_t>(store.aux_tap()));
  for (const auto& l : store.layers()) {
    w.u32(static_cast<std::uint32_t>(l.in_dim()));
    w.u32(static_cast<std::uint32_t>(l.out_dim()));
  }
  for (const auto& l : store.layers()) {
    for (double x : l.weights.data()) w.f64(x);
  }
  for (const auto& l : store.layers()) w.bytes(l.mask);
  for (const auto& [k, car] : store.sidecars()) {
    w.u32(static_cast<std::uint32_t>(k));
    w.u32(static_cast<std::uint32_t>(car.biases.size()));
    for (const auto& b : car.biases) w.vec(b);
    w.affine(car.main_head);
    w.affine(car.aux_head);
    w.u32(static_cast<std::uint32_t>(car.extra_groups.size()));
    for (const auto& g : car.extra_groups) w.vec(g);
  }
  return w.take();
}

ModelStore deserialize_store(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw FormatError("bad magic at offset 0: not an M2KD store");
  }
  const std::uint32_t version = r.u32();
  if (version != kStoreVersion) {
    throw FormatError("unsupported store version " + std::to_string(version));
  }
  const std::uint32_t layer_count = r.u32();
  const std::uint32_t step_count = r.u32();
  const std::uint32_t aux_tap = r.u32();
  if (layer_count == 0) throw FormatError("store has no layers");

  std::vector<std::size_t> dims;
  for (std::uint32_t n = 0; n < layer_count; ++n) {
    const std::size_t in = r.u32();
    const std::size_t out = r.u32();
    if (n == 0) {
      dims.push_back(in);
    } else if (dims.back() != in) {
      throw FormatError("layer " + std::to_string(n) +
                        " input dim does not chain at offset " +
                        std::to_string(r.offset()));
    }
    dims.push_back(out);
  }
  ModelStore store(dims, aux_tap);
  for (auto& l : store.layers()) {
    for (double& x : l.weights.data()) x = r.f64();
  }
  for (auto& l : store.layers()) {
    auto m = r.take(l.mask.size());
    std::copy(m.begin(), m.end(), l.mask.begin());
  }
  for (std::uint32_t s = 0; s < step_count; ++s) {
    StepSidecar car;
    car.step = static_cast<int>(r.u32());
    car.biases.resize(r.u32());
    for (auto& b : car.biases) b = r.vec();
    car.main_head = r.affine();
    car.aux_head = r.affine();
    car.extra_groups.resize(r.u32());
    for (auto& g : car.extra_groups) g = r.vec();
    try {
      store.register_sidecar(std::move(car));
    } catch (const Error& e) {
      throw FormatError(std::string(e.what()) + " at offset " +
                        std::to_string(r.offset()));
    }
  }
  if (!r.done()) {
    throw FormatError("trailing bytes after offset " + std::to_string(r.offset()));
  }
  return store;
}

void save_store(const ModelStore& store, const std::filesystem::path& path) {
  const auto bytes = serialize_store(store);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

ModelStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_store(bytes);
}

}  // namespace m2kd
