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

#pragma once

#include <cstdint>
#include <functional>
#include <span>

namespace m2kd {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Max over coordinates of |analytic - central| / max(1e-12, |analytic| + |central|),
/// where central is the central difference of f with step epsilon. Throws
/// if f is non-finite anywhere it is evaluated.
double grad_check(const ScalarFunction& f, std::span<const double> point,
                  std::span<const double> analytic, double epsilon);

struct GradcheckOptions {
  double epsilon = 1e-5;
  unsigned instances = 20;
  std::uint64_t seed = 2024;
  // Flips the sign of one analytic gradient entry per check. Used to prove
  // the suite detects a broken backward rule.
  bool inject_fault = false;
};

struct GradcheckSummary {
  double loss_d = 0.0;
  double loss_mmd = 0.0;
  double loss_ad = 0.0;
  double loss_total = 0.0;
  double network = 0.0;
  unsigned instances = 0;

  double worst() const;
};

inline constexpr double kGradcheckTolerance = 1e-5;

/// Seeded random instances of every loss and the full network backward.
GradcheckSummary run_gradcheck_suite(const GradcheckOptions& options);

}  // namespace m2kd
