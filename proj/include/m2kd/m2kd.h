/*
 * Copyright 2026 The M2KD Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface of the m2kd shared library.
 *
 * Every function returns an m2kd_status. On failure a one-line message is
 * available from m2kd_last_error() until the next call on the same thread.
 * Handles are opaque and must be released with the matching *_free function.
 * String outputs are written NUL-terminated into caller buffers; when the
 * buffer is too small M2KD_ERR_BUFFER_TOO_SMALL is returned and *needed (if
 * given) receives the required size including the terminator.
 */

#ifndef M2KD_M2KD_H
#define M2KD_M2KD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define M2KD_API __declspec(dllexport)
#else
#  define M2KD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  M2KD_OK = 0,
  M2KD_ERR_INVALID_ARGUMENT = 1,
  M2KD_ERR_CONFIG = 2,
  M2KD_ERR_IO = 3,
  M2KD_ERR_FORMAT = 4,
  M2KD_ERR_RUNTIME = 5,
  M2KD_ERR_BUFFER_TOO_SMALL = 6
} m2kd_status;

typedef struct m2kd_config m2kd_config;
typedef struct m2kd_report m2kd_report;
typedef struct m2kd_store m2kd_store;

M2KD_API const char* m2kd_last_error(void);
M2KD_API const char* m2kd_version(void);

/* ---- configuration ---------------------------------------------------- */

/* Reads and validates a JSON config file. */
M2KD_API int m2kd_config_load(const char* path, m2kd_config** out);
/* Parses a JSON document held in memory. Relative paths resolve against the
 * current directory. */
M2KD_API int m2kd_config_parse(const char* json_text, m2kd_config** out);
/* Applies "dotted.key=value" and re-validates. On failure the config is left
 * unchanged. */
M2KD_API int m2kd_config_override(m2kd_config* cfg, const char* assignment);
/* Fully resolved config as JSON text. */
M2KD_API int m2kd_config_to_json(const m2kd_config* cfg, char* buf, size_t cap,
                                 size_t* needed);
M2KD_API int m2kd_config_output_dir(const m2kd_config* cfg, char* buf,
                                    size_t cap, size_t* needed);
M2KD_API void m2kd_config_free(m2kd_config* cfg);

/* ---- experiments ------------------------------------------------------ */

M2KD_API int m2kd_run(const m2kd_config* cfg, m2kd_report** out);

/* Writes report.json, the CSV views, memory.txt and store.bin. */
M2KD_API int m2kd_report_emit(const m2kd_report* report, const char* out_dir);
M2KD_API int m2kd_report_num_steps(const m2kd_report* report, size_t* out);
/* Copies up to cap overall-curve values; *count receives the step count. */
M2KD_API int m2kd_report_overall_curve(const m2kd_report* report, double* out,
                                       size_t cap, size_t* count);
M2KD_API int m2kd_report_average_accuracy(const m2kd_report* report,
                                          double* out);
/* "RESULT avg_acc=<v> steps=<P> method=<m>" */
M2KD_API int m2kd_report_summary(const m2kd_report* report, char* buf,
                                 size_t cap, size_t* needed);
M2KD_API void m2kd_report_free(m2kd_report* report);

/* Overall curves side by side, one column per report. */
M2KD_API int m2kd_write_compare_csv(const m2kd_report* const* reports,
                                    size_t count, const char* path);
/* Pruning-ratio sweep table, one row per report. */
M2KD_API int m2kd_write_sweep_csv(const m2kd_report* const* reports,
                                  size_t count, const char* path);

/* ---- gradient checks -------------------------------------------------- */

typedef struct {
  double epsilon;
  unsigned instances;
  uint64_t seed;
  int inject_fault; /* nonzero: corrupt one analytic gradient per check */
} m2kd_gradcheck_options;

typedef struct {
  double loss_d;
  double loss_mmd;
  double loss_ad;
  double loss_total;
  double network;
  double tolerance;
  unsigned instances;
  int passed;
} m2kd_gradcheck_result;

M2KD_API void m2kd_gradcheck_default_options(m2kd_gradcheck_options* opt);
M2KD_API int m2kd_gradcheck(const m2kd_gradcheck_options* opt,
                            m2kd_gradcheck_result* out);

/* ---- stores ----------------------------------------------------------- */

typedef struct {
  uint64_t mask_bytes;
  uint64_t sidecar_bytes;
  uint64_t masked_total;
  uint64_t full_snapshot_bytes;
  double ratio;
} m2kd_memory_report;

M2KD_API int m2kd_store_load(const char* path, m2kd_store** out);
M2KD_API int m2kd_store_save(const m2kd_store* store, const char* path);
M2KD_API int m2kd_store_num_steps(const m2kd_store* store, size_t* out);
M2KD_API int m2kd_store_input_dim(const m2kd_store* store, size_t* out);
/* Number of main logits of the step-k model. */
M2KD_API int m2kd_store_step_width(const m2kd_store* store, unsigned step,
                                   size_t* out);
/* Main logits of the reconstructed step-k model for a row-major batch x of
 * shape rows x cols. out must hold rows * step_width values. */
M2KD_API int m2kd_store_teacher_logits(const m2kd_store* store, unsigned step,
                                       const double* x, size_t rows,
                                       size_t cols, double* out, size_t cap);
M2KD_API int m2kd_store_memory(const m2kd_store* store, m2kd_memory_report* out);
M2KD_API void m2kd_store_free(m2kd_store* store);

/* Store of the network after the last step of a run. Caller frees. */
M2KD_API int m2kd_report_store(const m2kd_report* report, m2kd_store** out);

#ifdef __cplusplus
}
#endif

#endif /* M2KD_M2KD_H */
