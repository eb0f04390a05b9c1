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

// Exercises the shared library strictly through its C header.

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "m2kd/m2kd.h"

namespace {

const char* kSmallRun = R"({
  "dataset": {"kind": "blobs", "seed": 2, "n_classes": 4, "dim": 5,
              "per_class_train": 20, "per_class_test": 5, "center_scale": 2.0},
  "split": {"classes_per_batch": 2},
  "net": {"layer_dims": [5, 10, 10]},
  "train": {"epochs": 2, "batch_size": 16, "lr0": 0.01},
  "prune": {"ratio": 0.6, "finetune_epochs": 1}
})";

std::filesystem::path fresh(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("m2kd_capi_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("version and null handling") {
  CHECK(std::strlen(m2kd_version()) > 0);
  CHECK(m2kd_config_load(nullptr, nullptr) == M2KD_ERR_INVALID_ARGUMENT);
  CHECK(std::string(m2kd_last_error()).find("null") != std::string::npos);
  m2kd_config_free(nullptr);
  m2kd_report_free(nullptr);
  m2kd_store_free(nullptr);
}

TEST_CASE("config errors map to status codes") {
  m2kd_config* cfg = nullptr;
  CHECK(m2kd_config_load("/no/such/config.json", &cfg) == M2KD_ERR_IO);
  CHECK(cfg == nullptr);
  CHECK(std::string(m2kd_last_error()).find("/no/such/config.json") != std::string::npos);
  CHECK(m2kd_config_parse("{bad", &cfg) == M2KD_ERR_CONFIG);
  CHECK(m2kd_config_parse(R"({"nope": 1})", &cfg) == M2KD_ERR_CONFIG);
  CHECK(std::string(m2kd_last_error()).find("nope") != std::string::npos);
}

TEST_CASE("overrides validate and leave the config intact on failure") {
  m2kd_config* cfg = nullptr;
  REQUIRE(m2kd_config_parse(kSmallRun, &cfg) == M2KD_OK);
  CHECK(m2kd_config_override(cfg, "method=BOGUS") == M2KD_ERR_CONFIG);
  CHECK(m2kd_config_override(cfg, "train.seed=7") == M2KD_OK);
  size_t needed = 0;
  CHECK(m2kd_config_to_json(cfg, nullptr, 0, &needed) == M2KD_ERR_BUFFER_TOO_SMALL);
  std::string text(needed, '\0');
  REQUIRE(m2kd_config_to_json(cfg, text.data(), text.size(), &needed) == M2KD_OK);
  CHECK(text.find("\"method\": \"M2KD\"") != std::string::npos);
  CHECK(text.find("\"seed\": 7") != std::string::npos);
  m2kd_config_free(cfg);
}

TEST_CASE("run, emit and reload the store") {
  m2kd_config* cfg = nullptr;
  REQUIRE(m2kd_config_parse(kSmallRun, &cfg) == M2KD_OK);
  m2kd_report* report = nullptr;
  REQUIRE(m2kd_run(cfg, &report) == M2KD_OK);
  size_t steps = 0;
  CHECK(m2kd_report_num_steps(report, &steps) == M2KD_OK);
  CHECK(steps == 2);
  std::vector<double> curve(2);
  size_t count = 0;
  CHECK(m2kd_report_overall_curve(report, curve.data(), 1, &count) ==
        M2KD_ERR_BUFFER_TOO_SMALL);
  CHECK(m2kd_report_overall_curve(report, curve.data(), curve.size(), &count) == M2KD_OK);
  double avg = 0.0;
  CHECK(m2kd_report_average_accuracy(report, &avg) == M2KD_OK);
  CHECK(avg == (curve[0] + curve[1]) / 2.0);
  char line[128];
  CHECK(m2kd_report_summary(report, line, sizeof line, nullptr) == M2KD_OK);
  CHECK(std::string(line).rfind("RESULT avg_acc=", 0) == 0);

  const auto dir = fresh("emit");
  REQUIRE(m2kd_report_emit(report, dir.string().c_str()) == M2KD_OK);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "store.bin"));

  m2kd_store* live = nullptr;
  REQUIRE(m2kd_report_store(report, &live) == M2KD_OK);
  m2kd_store* loaded = nullptr;
  REQUIRE(m2kd_store_load((dir / "store.bin").string().c_str(), &loaded) == M2KD_OK);
  size_t n = 0, dim = 0, width = 0;
  CHECK(m2kd_store_num_steps(loaded, &n) == M2KD_OK);
  CHECK(n == 2);
  CHECK(m2kd_store_input_dim(loaded, &dim) == M2KD_OK);
  CHECK(dim == 5);
  CHECK(m2kd_store_step_width(loaded, 1, &width) == M2KD_OK);
  CHECK(width == 2);
  CHECK(m2kd_store_step_width(loaded, 3, &width) == M2KD_ERR_RUNTIME);

  std::vector<double> x(3 * 5);
  for (size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * static_cast<double>(i) - 0.7;
  std::vector<double> a(3 * 2), b(3 * 2);
  CHECK(m2kd_store_teacher_logits(live, 1, x.data(), 3, 5, a.data(), a.size()) == M2KD_OK);
  CHECK(m2kd_store_teacher_logits(loaded, 1, x.data(), 3, 5, b.data(), b.size()) == M2KD_OK);
  CHECK(a == b);
  CHECK(m2kd_store_teacher_logits(loaded, 1, x.data(), 3, 4, b.data(), b.size()) != M2KD_OK);

  m2kd_memory_report mem;
  CHECK(m2kd_store_memory(loaded, &mem) == M2KD_OK);
  CHECK(mem.mask_bytes == 5 * 10 + 10 * 10);
  CHECK(mem.masked_total == mem.mask_bytes + mem.sidecar_bytes);
  CHECK(mem.masked_total < mem.full_snapshot_bytes);

  const auto copy = dir / "copy.bin";
  CHECK(m2kd_store_save(loaded, copy.string().c_str()) == M2KD_OK);
  CHECK(std::filesystem::file_size(copy) == std::filesystem::file_size(dir / "store.bin"));

  m2kd_store_free(loaded);
  m2kd_store_free(live);
  m2kd_report_free(report);
  m2kd_config_free(cfg);
}

TEST_CASE("compare and sweep tables") {
  m2kd_config* cfg = nullptr;
  REQUIRE(m2kd_config_parse(kSmallRun, &cfg) == M2KD_OK);
  m2kd_report* m = nullptr;
  REQUIRE(m2kd_run(cfg, &m) == M2KD_OK);
  REQUIRE(m2kd_config_override(cfg, "method=FT") == M2KD_OK);
  m2kd_report* f = nullptr;
  REQUIRE(m2kd_run(cfg, &f) == M2KD_OK);
  const m2kd_report* both[] = {f, m};
  const auto dir = fresh("tables");
  std::filesystem::create_directories(dir);
  CHECK(m2kd_write_compare_csv(both, 2, (dir / "c.csv").string().c_str()) == M2KD_OK);
  CHECK(m2kd_write_sweep_csv(both, 2, (dir / "s.csv").string().c_str()) == M2KD_OK);
  CHECK(m2kd_write_compare_csv(both, 2, "/proc/forbidden/c.csv") == M2KD_ERR_IO);
  m2kd_report_free(f);
  m2kd_report_free(m);
  m2kd_config_free(cfg);
}

TEST_CASE("gradient checks through the C interface") {
  m2kd_gradcheck_options opt;
  m2kd_gradcheck_default_options(&opt);
  CHECK(opt.instances == 20);
  m2kd_gradcheck_result res;
  REQUIRE(m2kd_gradcheck(&opt, &res) == M2KD_OK);
  CHECK(res.passed == 1);
  opt.inject_fault = 1;
  REQUIRE(m2kd_gradcheck(&opt, &res) == M2KD_OK);
  CHECK(res.passed == 0);
  opt.epsilon = 0.0;
  CHECK(m2kd_gradcheck(&opt, &res) == M2KD_ERR_INVALID_ARGUMENT);
}

TEST_CASE("corrupt store files report a format error") {
  const auto dir = fresh("corrupt");
  std::filesystem::create_directories(dir);
  const auto path = dir / "junk.bin";
  {
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    std::fputs("JUNKJUNKJUNK", fp);
    std::fclose(fp);
  }
  m2kd_store* s = nullptr;
  CHECK(m2kd_store_load(path.string().c_str(), &s) == M2KD_ERR_FORMAT);
  CHECK(s == nullptr);
}

}  // TEST_SUITE
