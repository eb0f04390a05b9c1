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

#include "m2kd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

#include "m2kd/error.hpp"

namespace m2kd {

void Dataset::validate() const {
  if (features.rows() != labels.size()) {
    throw ShapeError("dataset has " + std::to_string(features.rows()) +
                     " feature rows but " + std::to_string(labels.size()) +
                     " labels");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes) {
      throw ShapeError("label " + std::to_string(l) + " outside " +
                       std::to_string(n_classes) + " classes");
    }
  }
  if (is_image() && height * width != features.cols()) {
    throw ShapeError("image dims do not match feature width");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.n_classes = n_classes;
  out.height = height;
  out.width = width;
  out.features = Tensor2(indices.size(), dim());
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = features.row(indices[r]);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.labels.push_back(labels[indices[r]]);
  }
  return out;
}

std::vector<std::size_t> Dataset::indices_in_classes(std::size_t lo,
                                                     std::size_t hi) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    if (l >= lo && l < hi) out.push_back(i);
  }
  return out;
}

TrainTest gen_blobs(const BlobParams& p) {
  if (p.n_classes == 0 || p.dim == 0 || p.per_class_train == 0 ||
      p.per_class_test == 0) {
    throw ConfigError("blob counts must all be >= 1");
  }
  Rng rng(p.seed);
  Tensor2 centers(p.n_classes, p.dim);
  for (double& c : centers.data()) c = rng.normal(0.0, p.center_scale);

  auto draw = [&](std::size_t per_class) {
    Dataset d;
    d.n_classes = p.n_classes;
    d.features = Tensor2(p.n_classes * per_class, p.dim);
    std::size_t r = 0;
    for (std::size_t c = 0; c < p.n_classes; ++c) {
      for (std::size_t s = 0; s < per_class; ++s, ++r) {
        for (std::size_t j = 0; j < p.dim; ++j) {
          d.features(r, j) = centers(c, j) + p.noise_sigma * rng.normal();
        }
        d.labels.push_back(static_cast<int>(c));
      }
    }
    return d;
  };
  TrainTest out;
  out.train = draw(p.per_class_train);
  out.test = draw(p.per_class_test);
  return out;
}

// --- IDX -----------------------------------------------------------------

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset,
                        const char* what) {
  if (bytes.size() < offset + 4) {
    throw FormatError(std::string(what) + " truncated at offset " +
                      std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> images,
                  std::span<const std::uint8_t> labels) {
  const std::uint32_t img_magic = read_be32(images, 0, "images file");
  if (img_magic != kImagesMagic) {
    throw FormatError("bad magic in images file at offset 0");
  }
  const std::uint32_t lbl_magic = read_be32(labels, 0, "labels file");
  if (lbl_magic != kLabelsMagic) {
    throw FormatError("bad magic in labels file at offset 0");
  }
  const std::size_t count = read_be32(images, 4, "images file");
  const std::size_t rows = read_be32(images, 8, "images file");
  const std::size_t cols = read_be32(images, 12, "images file");
  const std::size_t label_count = read_be32(labels, 4, "labels file");
  if (count != label_count) {
    throw FormatError("count mismatch at offset 4: " + std::to_string(count) +
                      " images vs " + std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + count * pixels) {
    throw FormatError("images file truncated at offset " +
                      std::to_string(images.size()));
  }
  if (labels.size() < 8 + count) {
    throw FormatError("labels file truncated at offset " +
                      std::to_string(labels.size()));
  }
  Dataset d;
  d.height = rows;
  d.width = cols;
  d.features = Tensor2(count, pixels);
  auto dst = d.features.data();
  for (std::size_t i = 0; i < count * pixels; ++i) {
    dst[i] = static_cast<double>(images[16 + i]) / 255.0;
  }
  int max_label = -1;
  for (std::size_t i = 0; i < count; ++i) {
    const int l = labels[8 + i];
    d.labels.push_back(l);
    max_label = std::max(max_label, l);
  }
  d.n_classes = static_cast<std::size_t>(max_label + 1);
  return d;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  try {
    return parse_idx(images, labels);
  } catch (const FormatError& e) {
    throw FormatError(images_path.string() + " / " + labels_path.string() +
                      ": " + e.what());
  }
}

void write_idx(const Dataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  if (!data.is_image()) throw Error("write_idx needs an image dataset");
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lbl(labels_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path.string() + " for writing");
  if (!lbl) throw IoError("cannot open " + labels_path.string() + " for writing");
  write_be32(img, kImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(data.size()));
  write_be32(img, static_cast<std::uint32_t>(data.height));
  write_be32(img, static_cast<std::uint32_t>(data.width));
  for (double v : data.features.data()) {
    const long b = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    img.put(static_cast<char>(static_cast<std::uint8_t>(b)));
  }
  write_be32(lbl, kLabelsMagic);
  write_be32(lbl, static_cast<std::uint32_t>(data.size()));
  for (int l : data.labels) lbl.put(static_cast<char>(static_cast<std::uint8_t>(l)));
  if (!img || !lbl) throw IoError("failed writing IDX pair");
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'd' << j << ',';
  out << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.features.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    out << data.labels[i] << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// --- class batches -------------------------------------------------------

Dataset ClassSplit::remap(const Dataset& data) const {
  Dataset out = data;
  for (int& l : out.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= to_remapped.size()) {
      throw ShapeError("label " + std::to_string(l) + " outside class split");
    }
    l = to_remapped[static_cast<std::size_t>(l)];
  }
  return out;
}

ClassSplit split_class_batches(std::size_t n_classes, std::size_t batch,
                               std::uint64_t order_seed) {
  if (batch == 0 || n_classes == 0 || n_classes % batch != 0) {
    throw ConfigError(std::to_string(n_classes) +
                      " classes cannot be split into batches of " +
                      std::to_string(batch));
  }
  ClassSplit s;
  Rng rng(order_seed);
  const auto order = rng.permutation(n_classes);
  s.to_original.resize(n_classes);
  s.to_remapped.resize(n_classes);
  for (std::size_t pos = 0; pos < n_classes; ++pos) {
    s.to_original[pos] = static_cast<int>(order[pos]);
    s.to_remapped[order[pos]] = static_cast<int>(pos);
  }
  for (std::size_t k = 0; k < n_classes / batch; ++k) s.layout.append(batch);
  return s;
}

void hflip(Tensor2& batch, std::size_t height, std::size_t width, Rng& rng,
           double p) {
  if (height == 0 || width == 0) return;
  if (batch.cols() != height * width) {
    throw ShapeError("hflip: batch width does not match image dims");
  }
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    if (!(rng.uniform() < p)) continue;
    auto row = batch.row(i);
    for (std::size_t r = 0; r < height; ++r) {
      std::reverse(row.begin() + static_cast<std::ptrdiff_t>(r * width),
                   row.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
    }
  }
}

}  // namespace m2kd
