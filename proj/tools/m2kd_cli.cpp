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

// Command-line front end over the C API.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "m2kd/m2kd.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Carries an exit code out of a command.
struct Failure {
  int code;
  std::string message;
};

struct ConfigDeleter {
  void operator()(m2kd_config* c) const { m2kd_config_free(c); }
};
struct ReportDeleter {
  void operator()(m2kd_report* r) const { m2kd_report_free(r); }
};
using ConfigPtr = std::unique_ptr<m2kd_config, ConfigDeleter>;
using ReportPtr = std::unique_ptr<m2kd_report, ReportDeleter>;

void check(int status, int exit_code) {
  if (status != M2KD_OK) throw Failure{exit_code, m2kd_last_error()};
}

std::string read_string(int (*fn)(const m2kd_config*, char*, size_t, size_t*),
                        const m2kd_config* cfg) {
  size_t needed = 0;
  fn(cfg, nullptr, 0, &needed);
  std::string s(needed, '\0');
  check(fn(cfg, s.data(), s.size(), &needed), kExitRuntime);
  s.resize(needed - 1);
  return s;
}

ConfigPtr load(const std::string& path, const std::vector<std::string>& overrides) {
  m2kd_config* raw = nullptr;
  check(m2kd_config_load(path.c_str(), &raw), kExitUsage);
  ConfigPtr cfg(raw);
  for (const auto& o : overrides) check(m2kd_config_override(cfg.get(), o.c_str()), kExitUsage);
  return cfg;
}

std::filesystem::path output_dir(const m2kd_config* cfg, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("M2KD_OUT"); env != nullptr && *env != '\0') return env;
  return read_string(m2kd_config_output_dir, cfg);
}

ReportPtr run_one(const m2kd_config* cfg, const std::filesystem::path& dir) {
  m2kd_report* raw = nullptr;
  check(m2kd_run(cfg, &raw), kExitRuntime);
  ReportPtr report(raw);
  check(m2kd_report_emit(report.get(), dir.string().c_str()), kExitRuntime);
  return report;
}

std::vector<double> curve(const m2kd_report* r) {
  size_t n = 0;
  check(m2kd_report_num_steps(r, &n), kExitRuntime);
  std::vector<double> v(n);
  check(m2kd_report_overall_curve(r, v.data(), v.size(), &n), kExitRuntime);
  return v;
}

std::string summary(const m2kd_report* r) {
  size_t needed = 0;
  m2kd_report_summary(r, nullptr, 0, &needed);
  std::string s(needed, '\0');
  check(m2kd_report_summary(r, s.data(), s.size(), &needed), kExitRuntime);
  s.resize(needed - 1);
  return s;
}

void print_curve(const char* label, const m2kd_report* r) {
  const auto c = curve(r);
  for (size_t k = 0; k < c.size(); ++k) {
    std::printf("%sstep %zu accuracy %.17g\n", label, k + 1, c[k]);
  }
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

int cmd_run(const std::string& path, const std::vector<std::string>& overrides,
            const std::string& out_flag) {
  ConfigPtr cfg = load(path, overrides);
  const auto dir = output_dir(cfg.get(), out_flag);
  ReportPtr report = run_one(cfg.get(), dir);
  print_curve("", report.get());
  std::printf("%s\n", summary(report.get()).c_str());
  return 0;
}

int cmd_compare(const std::string& path, const std::vector<std::string>& methods,
                const std::vector<std::string>& overrides, const std::string& out_flag) {
  static const std::set<std::string> known = {"FT", "LWF_MC", "M2KD", "M2KD_NOPRUNE"};
  for (const auto& m : methods) {
    if (!known.contains(m)) throw Failure{kExitUsage, "unknown method '" + m + "'"};
  }
  ConfigPtr base = load(path, overrides);
  const auto dir = output_dir(base.get(), out_flag);
  std::vector<ReportPtr> reports;
  for (const auto& m : methods) {
    ConfigPtr cfg = load(path, overrides);
    check(m2kd_config_override(cfg.get(), ("method=" + quoted(m)).c_str()), kExitUsage);
    reports.push_back(run_one(cfg.get(), dir / m));
    print_curve((m + " ").c_str(), reports.back().get());
  }
  std::vector<const m2kd_report*> handles;
  for (const auto& r : reports) handles.push_back(r.get());
  const auto csv = dir / "compare.csv";
  check(m2kd_write_compare_csv(handles.data(), handles.size(), csv.string().c_str()),
        kExitRuntime);
  std::printf("wrote %s\n", csv.string().c_str());
  for (const auto& r : reports) std::printf("%s\n", summary(r.get()).c_str());
  return 0;
}

int cmd_sweep(const std::string& path, const std::vector<double>& ratios,
              bool include_noprune, const std::vector<std::string>& overrides,
              const std::string& out_flag) {
  ConfigPtr base = load(path, overrides);
  const auto dir = output_dir(base.get(), out_flag);
  std::vector<ReportPtr> reports;
  for (double r : ratios) {
    ConfigPtr cfg = load(path, overrides);
    char assignment[64];
    std::snprintf(assignment, sizeof assignment, "prune.ratio=%.17g", r);
    check(m2kd_config_override(cfg.get(), assignment), kExitUsage);
    char sub[64];
    std::snprintf(sub, sizeof sub, "ratio_%g", r);
    reports.push_back(run_one(cfg.get(), dir / sub));
    char label[64];
    std::snprintf(label, sizeof label, "ratio %g ", r);
    print_curve(label, reports.back().get());
  }
  if (include_noprune) {
    ConfigPtr cfg = load(path, overrides);
    check(m2kd_config_override(cfg.get(), "method=\"M2KD_NOPRUNE\""), kExitUsage);
    check(m2kd_config_override(cfg.get(), "prune.enabled=false"), kExitUsage);
    reports.push_back(run_one(cfg.get(), dir / "none"));
    print_curve("none ", reports.back().get());
  }
  std::vector<const m2kd_report*> handles;
  for (const auto& r : reports) handles.push_back(r.get());
  const auto csv = dir / "sweep.csv";
  check(m2kd_write_sweep_csv(handles.data(), handles.size(), csv.string().c_str()),
        kExitRuntime);
  std::printf("wrote %s\n", csv.string().c_str());
  std::printf("%s\n", summary(handles.front()).c_str());
  return 0;
}

int cmd_gradcheck(double epsilon, unsigned instances, unsigned long long seed, bool fault) {
  m2kd_gradcheck_options opt;
  m2kd_gradcheck_default_options(&opt);
  opt.epsilon = epsilon;
  opt.instances = instances;
  opt.seed = seed;
  opt.inject_fault = fault ? 1 : 0;
  m2kd_gradcheck_result res;
  check(m2kd_gradcheck(&opt, &res), kExitRuntime);
  const std::pair<const char*, double> rows[] = {{"loss_d", res.loss_d},
                                                 {"loss_mmd", res.loss_mmd},
                                                 {"loss_ad", res.loss_ad},
                                                 {"loss_total", res.loss_total},
                                                 {"network", res.network}};
  std::string failing;
  for (const auto& [name, err] : rows) {
    const bool ok = err <= res.tolerance;
    std::printf("%-10s max_rel_err=%.3e %s\n", name, err, ok ? "ok" : "FAIL");
    if (!ok) failing += failing.empty() ? name : std::string(",") + name;
  }
  std::printf("instances=%u tolerance=%.0e\n", res.instances, res.tolerance);
  if (!failing.empty()) throw Failure{kExitRuntime, "gradient check failed: " + failing};
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental class learning with multi-model distillation"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> overrides;
  std::string out;

  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("config", config, "Config file")->required();
  run->add_option("--override", overrides, "Dotted key=value assignment");
  run->add_option("--out", out, "Output directory");

  std::vector<std::string> methods;
  auto* compare = app.add_subcommand("compare", "Run several methods on the same data");
  compare->add_option("config", config, "Config file")->required();
  compare->add_option("methods", methods, "FT, LWF_MC, M2KD, M2KD_NOPRUNE")
      ->required()
      ->expected(2, -1);
  compare->add_option("--override", overrides, "Dotted key=value assignment");
  compare->add_option("--out", out, "Output directory");

  std::vector<double> ratios;
  bool include_noprune = false;
  auto* sweep = app.add_subcommand("sweep", "Pruning-ratio sweep");
  sweep->add_option("config", config, "Config file")->required();
  sweep->add_option("--ratios", ratios, "Pruning ratios")->required()->expected(1, -1);
  sweep->add_flag("--include-noprune", include_noprune, "Add a run without pruning");
  sweep->add_option("--override", overrides, "Dotted key=value assignment");
  sweep->add_option("--out", out, "Output directory");

  double epsilon = 1e-5;
  unsigned instances = 20;
  unsigned long long seed = 2024;
  bool fault = false;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad->add_option("--epsilon", epsilon, "Central-difference step")->check(CLI::PositiveNumber);
  grad->add_option("--instances", instances, "Random instances per check")
      ->check(CLI::PositiveNumber);
  grad->add_option("--seed", seed, "Instance seed");
  grad->add_flag("--inject-fault", fault, "Corrupt one analytic gradient per check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(config, overrides, out);
    if (*compare) return cmd_compare(config, methods, overrides, out);
    if (*sweep) return cmd_sweep(config, ratios, include_noprune, overrides, out);
    if (*grad) return cmd_gradcheck(epsilon, instances, seed, fault);
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.code;
  }
  return kExitUsage;
}
