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

#include "m2kd/config.hpp"

#include <fstream>
#include <initializer_list>
#include <string>

#include "m2kd/error.hpp"

namespace m2kd {

using nlohmann::json;

Method parse_method(std::string_view name) {
  if (name == "FT") return Method::FT;
  if (name == "LWF_MC") return Method::LWF_MC;
  if (name == "M2KD") return Method::M2KD;
  if (name == "M2KD_NOPRUNE") return Method::M2KD_NOPRUNE;
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected FT, LWF_MC, M2KD or M2KD_NOPRUNE)");
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::FT: return "FT";
    case Method::LWF_MC: return "LWF_MC";
    case Method::M2KD: return "M2KD";
    case Method::M2KD_NOPRUNE: return "M2KD_NOPRUNE";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  net.validate();
  train.validate();
  loss.validate();
  prune.validate();
  if (dataset.kind == DatasetKind::Blobs) {
    if (net.layer_dims.front() != dataset.blobs.dim) {
      throw ConfigError("net.layer_dims[0] must equal dataset.dim");
    }
    if (split.classes_per_batch == 0 ||
        dataset.blobs.n_classes % split.classes_per_batch != 0) {
      throw ConfigError(std::to_string(dataset.blobs.n_classes) +
                        " classes are not divisible into batches of " +
                        std::to_string(split.classes_per_batch));
    }
  }
  if (method == Method::M2KD && !prune_enabled) {
    throw ConfigError("M2KD reconstructs teachers from masks and needs "
                      "prune.enabled; use M2KD_NOPRUNE for full snapshots");
  }
}

namespace {

// Walks one object of the document, rejecting keys it was not asked about.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  void allow_only(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, value] : node_.items()) {
      bool known = false;
      for (auto k : keys) known = known || key == k;
      if (!known) throw ConfigError("unknown key '" + where(key) + "'");
    }
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  Section child(const std::string& key) const {
    static const json empty = json::object();
    return has(key) ? Section(node_.at(key), where(key)) : Section(empty, where(key));
  }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    try {
      return node_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("invalid value for '" + where(key) + "'");
    }
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw ConfigError("'" + where(key) + "' must be a non-negative integer");
    }
    return static_cast<std::size_t>(v.get<std::int64_t>());
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number()) throw ConfigError("'" + where(key) + "' must be a number");
    return v.get<double>();
  }

  std::string where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& node_;
  std::string path_;
};

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  Section root(doc, "");
  root.allow_only({"dataset", "split", "method", "net", "train", "prune", "loss",
                   "exemplar", "output"});

  const Section ds = root.child("dataset");
  const std::string kind = ds.get<std::string>("kind", "blobs");
  if (kind == "blobs") {
    ds.allow_only({"kind", "seed", "n_classes", "dim", "per_class_train",
                   "per_class_test", "center_scale", "noise_sigma"});
    BlobParams& b = cfg.dataset.blobs;
    b.seed = ds.count("seed", b.seed);
    b.n_classes = ds.count("n_classes", b.n_classes);
    b.dim = ds.count("dim", b.dim);
    b.per_class_train = ds.count("per_class_train", b.per_class_train);
    b.per_class_test = ds.count("per_class_test", b.per_class_test);
    b.center_scale = ds.number("center_scale", b.center_scale);
    b.noise_sigma = ds.number("noise_sigma", b.noise_sigma);
  } else if (kind == "idx") {
    ds.allow_only({"kind", "train_images", "train_labels", "test_images",
                   "test_labels"});
    cfg.dataset.kind = DatasetKind::Idx;
    for (const char* key : {"train_images", "train_labels", "test_images", "test_labels"}) {
      if (!ds.has(key)) throw ConfigError("missing '" + ds.where(key) + "'");
    }
    cfg.dataset.train_images = resolve(base_dir, ds.get<std::string>("train_images", ""));
    cfg.dataset.train_labels = resolve(base_dir, ds.get<std::string>("train_labels", ""));
    cfg.dataset.test_images = resolve(base_dir, ds.get<std::string>("test_images", ""));
    cfg.dataset.test_labels = resolve(base_dir, ds.get<std::string>("test_labels", ""));
  } else {
    throw ConfigError("dataset.kind must be 'blobs' or 'idx'");
  }

  const Section split = root.child("split");
  split.allow_only({"classes_per_batch", "order_seed"});
  cfg.split.classes_per_batch = split.count("classes_per_batch", cfg.split.classes_per_batch);
  cfg.split.order_seed = split.count("order_seed", cfg.split.order_seed);

  cfg.method = parse_method(root.get<std::string>("method", "M2KD"));

  const Section net = root.child("net");
  net.allow_only({"layer_dims", "aux_tap", "seed"});
  if (net.has("layer_dims")) {
    cfg.net.layer_dims = net.get<std::vector<std::size_t>>("layer_dims", {});
  } else if (cfg.dataset.kind == DatasetKind::Blobs) {
    cfg.net.layer_dims = {cfg.dataset.blobs.dim, 32, 32};
  } else {
    throw ConfigError("net.layer_dims is required for idx datasets");
  }
  cfg.net.aux_tap = net.count(
      "aux_tap", NetConfig::default_aux_tap(cfg.net.hidden_layers()));
  cfg.net.seed = net.count("seed", cfg.net.seed);

  const Section train = root.child("train");
  train.allow_only({"epochs", "batch_size", "lr0", "lr_decay_factor",
                    "lr_decay_every", "momentum", "weight_decay_first_step",
                    "seed", "augment"});
  TrainConfig& t = cfg.train;
  t.epochs = train.count("epochs", t.epochs);
  t.batch_size = train.count("batch_size", t.batch_size);
  t.lr0 = train.number("lr0", t.lr0);
  t.lr_decay_factor = train.number("lr_decay_factor", t.lr_decay_factor);
  t.lr_decay_every = train.count("lr_decay_every", t.lr_decay_every);
  t.momentum = train.number("momentum", t.momentum);
  t.weight_decay_first_step =
      train.number("weight_decay_first_step", t.weight_decay_first_step);
  t.seed = train.count("seed", t.seed);
  t.augment = train.get<bool>("augment", t.augment);

  const Section prune = root.child("prune");
  prune.allow_only({"enabled", "ratio", "finetune_epochs", "finetune_lr"});
  cfg.prune_enabled = prune.get<bool>("enabled", true);
  cfg.prune.ratio = prune.number(
      "ratio", default_prune_ratio(cfg.split.classes_per_batch));
  cfg.prune.finetune_epochs = prune.count("finetune_epochs", cfg.prune.finetune_epochs);
  if (prune.has("finetune_lr")) {
    cfg.prune.finetune_lr = prune.number("finetune_lr", 0.0);
  }

  const Section loss = root.child("loss");
  loss.allow_only({"alpha", "lambda"});
  cfg.loss.alpha = loss.number("alpha", cfg.loss.alpha);
  cfg.loss.lambda = loss.number("lambda", cfg.loss.lambda);

  const Section ex = root.child("exemplar");
  ex.allow_only({"enabled", "budget"});
  cfg.exemplar.enabled = ex.get<bool>("enabled", false);
  cfg.exemplar.budget = ex.count("budget", 0);

  const Section out = root.child("output");
  out.allow_only({"dir", "dump_dataset"});
  cfg.out_dir = out.get<std::string>("dir", cfg.out_dir.string());
  cfg.dump_dataset = out.get<bool>("dump_dataset", false);

  cfg.validate();
  return cfg;
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_config_file(path), path.parent_path());
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty segment");
    if (!node->is_object()) throw ConfigError("override path '" + key + "' crosses a value");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

json to_json(const ExperimentConfig& c) {
  json ds;
  if (c.dataset.kind == DatasetKind::Blobs) {
    const BlobParams& b = c.dataset.blobs;
    ds = {{"kind", "blobs"},          {"seed", b.seed},
          {"n_classes", b.n_classes}, {"dim", b.dim},
          {"per_class_train", b.per_class_train},
          {"per_class_test", b.per_class_test},
          {"center_scale", b.center_scale},
          {"noise_sigma", b.noise_sigma}};
  } else {
    ds = {{"kind", "idx"},
          {"train_images", c.dataset.train_images.string()},
          {"train_labels", c.dataset.train_labels.string()},
          {"test_images", c.dataset.test_images.string()},
          {"test_labels", c.dataset.test_labels.string()}};
  }
  json prune = {{"enabled", c.prune_enabled},
                {"ratio", c.prune.ratio},
                {"finetune_epochs", c.prune.finetune_epochs},
                {"finetune_lr", c.prune.learning_rate(c.train)}};
  return {
      {"dataset", ds},
      {"split", {{"classes_per_batch", c.split.classes_per_batch},
                 {"order_seed", c.split.order_seed}}},
      {"method", std::string(method_name(c.method))},
      {"net", {{"layer_dims", c.net.layer_dims},
               {"aux_tap", c.net.aux_tap},
               {"seed", c.net.seed}}},
      {"train", {{"epochs", c.train.epochs},
                 {"batch_size", c.train.batch_size},
                 {"lr0", c.train.lr0},
                 {"lr_decay_factor", c.train.lr_decay_factor},
                 {"lr_decay_every", c.train.lr_decay_every},
                 {"momentum", c.train.momentum},
                 {"weight_decay_first_step", c.train.weight_decay_first_step},
                 {"seed", c.train.seed},
                 {"augment", c.train.augment}}},
      {"prune", prune},
      {"loss", {{"alpha", c.loss.alpha}, {"lambda", c.loss.lambda}}},
      {"exemplar", {{"enabled", c.exemplar.enabled}, {"budget", c.exemplar.budget}}},
      {"output", {{"dir", c.out_dir.string()}, {"dump_dataset", c.dump_dataset}}},
  };
}

}  // namespace m2kd
