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

#include "m2kd/m2kd.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "m2kd/config.hpp"
#include "m2kd/error.hpp"
#include "m2kd/gradcheck.hpp"
#include "m2kd/masked_store.hpp"
#include "m2kd/protocol.hpp"
#include "m2kd/report.hpp"

struct m2kd_config {
  nlohmann::json doc;
  std::filesystem::path base_dir;
  m2kd::ExperimentConfig parsed;
};

struct m2kd_report {
  m2kd::ExperimentReport report;
  m2kd::ModelStore store;
};

struct m2kd_store {
  m2kd::ModelStore store;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& message) {
  g_last_error = message;
  return code;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return M2KD_OK;
  } catch (const m2kd::ConfigError& e) {
    return fail(M2KD_ERR_CONFIG, e.what());
  } catch (const m2kd::IoError& e) {
    return fail(M2KD_ERR_IO, e.what());
  } catch (const m2kd::FormatError& e) {
    return fail(M2KD_ERR_FORMAT, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(M2KD_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(M2KD_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(M2KD_ERR_RUNTIME, e.what());
  }
}

int copy_string(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed != nullptr) *needed = s.size() + 1;
  if (buf == nullptr || cap < s.size() + 1) {
    return fail(M2KD_ERR_BUFFER_TOO_SMALL, "buffer too small");
  }
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return M2KD_OK;
}

int null_argument(const char* fn) {
  return fail(M2KD_ERR_INVALID_ARGUMENT, std::string(fn) + ": null argument");
}

void write_file(const char* path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw m2kd::IoError(std::string("cannot open ") + path + " for writing");
  out << text;
  if (!out) throw m2kd::IoError(std::string("failed writing ") + path);
}

std::vector<m2kd::ExperimentReport> collect(const m2kd_report* const* reports,
                                            size_t count) {
  std::vector<m2kd::ExperimentReport> out;
  for (size_t i = 0; i < count; ++i) {
    if (reports[i] == nullptr) throw m2kd::Error("null report handle");
    out.push_back(reports[i]->report);
  }
  return out;
}

}  // namespace

extern "C" {

const char* m2kd_last_error(void) { return g_last_error.c_str(); }

const char* m2kd_version(void) { return "1.0.0"; }

int m2kd_config_load(const char* path, m2kd_config** out) {
  if (path == nullptr || out == nullptr) return null_argument("m2kd_config_load");
  *out = nullptr;
  return guarded([&] {
    auto cfg = std::make_unique<m2kd_config>();
    cfg->doc = m2kd::read_config_file(path);
    cfg->base_dir = std::filesystem::path(path).parent_path();
    cfg->parsed = m2kd::parse_config(cfg->doc, cfg->base_dir);
    *out = cfg.release();
  });
}

int m2kd_config_parse(const char* json_text, m2kd_config** out) {
  if (json_text == nullptr || out == nullptr) return null_argument("m2kd_config_parse");
  *out = nullptr;
  return guarded([&] {
    auto cfg = std::make_unique<m2kd_config>();
    try {
      cfg->doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw m2kd::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    cfg->parsed = m2kd::parse_config(cfg->doc, {});
    *out = cfg.release();
  });
}

int m2kd_config_override(m2kd_config* cfg, const char* assignment) {
  if (cfg == nullptr || assignment == nullptr) return null_argument("m2kd_config_override");
  return guarded([&] {
    nlohmann::json doc = cfg->doc;
    m2kd::apply_override(doc, assignment);
    m2kd::ExperimentConfig parsed = m2kd::parse_config(doc, cfg->base_dir);
    cfg->doc = std::move(doc);
    cfg->parsed = std::move(parsed);
  });
}

int m2kd_config_to_json(const m2kd_config* cfg, char* buf, size_t cap, size_t* needed) {
  if (cfg == nullptr) return null_argument("m2kd_config_to_json");
  return copy_string(m2kd::to_json(cfg->parsed).dump(2), buf, cap, needed);
}

int m2kd_config_output_dir(const m2kd_config* cfg, char* buf, size_t cap,
                           size_t* needed) {
  if (cfg == nullptr) return null_argument("m2kd_config_output_dir");
  return copy_string(cfg->parsed.out_dir.string(), buf, cap, needed);
}

void m2kd_config_free(m2kd_config* cfg) { delete cfg; }

int m2kd_run(const m2kd_config* cfg, m2kd_report** out) {
  if (cfg == nullptr || out == nullptr) return null_argument("m2kd_run");
  *out = nullptr;
  return guarded([&] {
    m2kd::ExperimentResult result = m2kd::run_experiment(cfg->parsed);
    *out = new m2kd_report{std::move(result.report), std::move(result.store)};
  });
}

int m2kd_report_emit(const m2kd_report* report, const char* out_dir) {
  if (report == nullptr || out_dir == nullptr) return null_argument("m2kd_report_emit");
  return guarded([&] { m2kd::emit(report->report, out_dir, &report->store); });
}

int m2kd_report_num_steps(const m2kd_report* report, size_t* out) {
  if (report == nullptr || out == nullptr) return null_argument("m2kd_report_num_steps");
  *out = report->report.num_steps();
  return M2KD_OK;
}

int m2kd_report_overall_curve(const m2kd_report* report, double* out, size_t cap,
                              size_t* count) {
  if (report == nullptr) return null_argument("m2kd_report_overall_curve");
  const auto& curve = report->report.overall_curve;
  if (count != nullptr) *count = curve.size();
  if (out == nullptr || cap < curve.size()) {
    return fail(M2KD_ERR_BUFFER_TOO_SMALL, "buffer too small");
  }
  std::copy(curve.begin(), curve.end(), out);
  return M2KD_OK;
}

int m2kd_report_average_accuracy(const m2kd_report* report, double* out) {
  if (report == nullptr || out == nullptr) {
    return null_argument("m2kd_report_average_accuracy");
  }
  *out = report->report.average_accuracy();
  return M2KD_OK;
}

int m2kd_report_summary(const m2kd_report* report, char* buf, size_t cap,
                        size_t* needed) {
  if (report == nullptr) return null_argument("m2kd_report_summary");
  return copy_string(m2kd::summary_line(report->report), buf, cap, needed);
}

void m2kd_report_free(m2kd_report* report) { delete report; }

int m2kd_write_compare_csv(const m2kd_report* const* reports, size_t count,
                           const char* path) {
  if (reports == nullptr || path == nullptr) return null_argument("m2kd_write_compare_csv");
  return guarded([&] { write_file(path, m2kd::compare_csv(collect(reports, count))); });
}

int m2kd_write_sweep_csv(const m2kd_report* const* reports, size_t count,
                         const char* path) {
  if (reports == nullptr || path == nullptr) return null_argument("m2kd_write_sweep_csv");
  return guarded([&] { write_file(path, m2kd::sweep_table(collect(reports, count))); });
}

void m2kd_gradcheck_default_options(m2kd_gradcheck_options* opt) {
  if (opt == nullptr) return;
  const m2kd::GradcheckOptions d;
  opt->epsilon = d.epsilon;
  opt->instances = d.instances;
  opt->seed = d.seed;
  opt->inject_fault = d.inject_fault ? 1 : 0;
}

int m2kd_gradcheck(const m2kd_gradcheck_options* opt, m2kd_gradcheck_result* out) {
  if (opt == nullptr || out == nullptr) return null_argument("m2kd_gradcheck");
  if (!(opt->epsilon > 0.0) || opt->instances == 0) {
    return fail(M2KD_ERR_INVALID_ARGUMENT, "epsilon and instances must be positive");
  }
  return guarded([&] {
    m2kd::GradcheckOptions o;
    o.epsilon = opt->epsilon;
    o.instances = opt->instances;
    o.seed = opt->seed;
    o.inject_fault = opt->inject_fault != 0;
    const m2kd::GradcheckSummary s = m2kd::run_gradcheck_suite(o);
    out->loss_d = s.loss_d;
    out->loss_mmd = s.loss_mmd;
    out->loss_ad = s.loss_ad;
    out->loss_total = s.loss_total;
    out->network = s.network;
    out->tolerance = m2kd::kGradcheckTolerance;
    out->instances = s.instances;
    out->passed = s.worst() <= m2kd::kGradcheckTolerance ? 1 : 0;
  });
}

int m2kd_store_load(const char* path, m2kd_store** out) {
  if (path == nullptr || out == nullptr) return null_argument("m2kd_store_load");
  *out = nullptr;
  return guarded([&] { *out = new m2kd_store{m2kd::load_store(path)}; });
}

int m2kd_store_save(const m2kd_store* store, const char* path) {
  if (store == nullptr || path == nullptr) return null_argument("m2kd_store_save");
  return guarded([&] { m2kd::save_store(store->store, path); });
}

int m2kd_store_num_steps(const m2kd_store* store, size_t* out) {
  if (store == nullptr || out == nullptr) return null_argument("m2kd_store_num_steps");
  *out = static_cast<size_t>(store->store.current_step());
  return M2KD_OK;
}

int m2kd_store_input_dim(const m2kd_store* store, size_t* out) {
  if (store == nullptr || out == nullptr) return null_argument("m2kd_store_input_dim");
  *out = store->store.layers().front().in_dim();
  return M2KD_OK;
}

int m2kd_store_step_width(const m2kd_store* store, unsigned step, size_t* out) {
  if (store == nullptr || out == nullptr) return null_argument("m2kd_store_step_width");
  return guarded([&] {
    *out = store->store.sidecar(static_cast<int>(step)).main_head.width();
  });
}

int m2kd_store_teacher_logits(const m2kd_store* store, unsigned step, const double* x,
                              size_t rows, size_t cols, double* out, size_t cap) {
  if (store == nullptr || x == nullptr || out == nullptr) {
    return null_argument("m2kd_store_teacher_logits");
  }
  return guarded([&] {
    const m2kd::TeacherModel teacher =
        m2kd::reconstruct_model(store->store, static_cast<int>(step));
    m2kd::Tensor2 input(rows, cols, std::vector<double>(x, x + rows * cols));
    const m2kd::Tensor2 logits = teacher.forward(input).main_logits;
    if (cap < logits.size()) throw m2kd::Error("output buffer too small for logits");
    std::copy(logits.data().begin(), logits.data().end(), out);
  });
}

int m2kd_store_memory(const m2kd_store* store, m2kd_memory_report* out) {
  if (store == nullptr || out == nullptr) return null_argument("m2kd_store_memory");
  const m2kd::MemoryReport m = m2kd::memory_report(store->store);
  out->mask_bytes = m.mask_bytes;
  out->sidecar_bytes = m.sidecar_bytes;
  out->masked_total = m.masked_total;
  out->full_snapshot_bytes = m.full_snapshot_bytes;
  out->ratio = m.ratio;
  return M2KD_OK;
}

void m2kd_store_free(m2kd_store* store) { delete store; }

int m2kd_report_store(const m2kd_report* report, m2kd_store** out) {
  if (report == nullptr || out == nullptr) return null_argument("m2kd_report_store");
  *out = nullptr;
  return guarded([&] { *out = new m2kd_store{report->store}; });
}

}  // extern "C"
