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

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "m2kd/error.hpp"
#include "m2kd/losses.hpp"
#include "test_util.hpp"

using namespace m2kd;
using test::bce_oracle;
using test::sigmoid_oracle;

namespace {

constexpr double kLn2 = std::numbers::ln2;

Tensor2 row(std::initializer_list<double> v) { return Tensor2::from_rows({v}); }

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("per-logit cross-entropy values") {
  const BceTerm a = bce_per_logit(1.0, 0.0);
  CHECK(a.loss == doctest::Approx(kLn2).epsilon(1e-15));
  CHECK(a.grad == -0.5);
  // 50-digit reference value of the closed form at t = 0.9, z = 2.
  CHECK(std::fabs(bce_per_logit(0.9, 2.0).loss - 0.3269280110429724964) < 1e-15);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const double z = rng.normal(0.0, 3.0);
    const double t = rng.uniform();
    CHECK(bce_per_logit(t, z).loss == doctest::Approx(bce_oracle(t, z)).epsilon(1e-12));
    CHECK(bce_per_logit(sigmoid(z), z).grad == 0.0);
  }
}

TEST_CASE("per-logit cross-entropy stays finite on extreme logits") {
  CHECK(std::isfinite(bce_per_logit(0.0, 800.0).loss));
  CHECK(std::isfinite(bce_per_logit(1.0, -800.0).loss));
  CHECK(bce_per_logit(1.0, 800.0).loss == 0.0);
}

TEST_CASE("one_hot validates labels") {
  const std::vector<int> y{1, 0};
  CHECK(one_hot(y, 3) == Tensor2::from_rows({{0, 1, 0}, {1, 0, 0}}));
  const std::vector<int> bad{3};
  CHECK_THROWS_AS(one_hot(bad, 3), ShapeError);
}

TEST_CASE("plain classification loss") {
  const Tensor2 y = Tensor2::from_rows({{0, 1, 0}});
  CHECK(loss_ft(row({-30, 30, -30}), y).value < 1e-12);
  CHECK(loss_ft(row({0, 0, 0}), y).value == doctest::Approx(3 * kLn2).epsilon(1e-15));
  Rng rng(2);
  const Tensor2 z = test::random_tensor(rng, 3, 4);
  const Tensor2 labels = one_hot(std::vector<int>{2, 0, 3}, 4);
  const LossResult r = loss_ft(z, labels);
  double oracle = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      oracle += bce_oracle(labels(i, j), z(i, j));
      CHECK(r.grad(i, j) ==
            doctest::Approx((sigmoid_oracle(z(i, j)) - labels(i, j)) / 3.0).epsilon(1e-12));
    }
  }
  CHECK(r.value == doctest::Approx(oracle / 3.0).epsilon(1e-12));
}

TEST_CASE("sequential distillation toy value") {
  const LossResult r = loss_d(row({0, 0}), row({0.8}), row({0, 1}), 1);
  CHECK(r.value == doctest::Approx(bce_oracle(0.8, 0.0) + bce_oracle(1.0, 0.0)).epsilon(1e-15));
  CHECK(r.value == doctest::Approx(1.3862943611198906).epsilon(1e-15));
  CHECK(r.grad(0, 0) == doctest::Approx(0.5 - 0.8));
  CHECK(r.grad(0, 1) == -0.5);
}

TEST_CASE("sequential distillation without old classes is classification") {
  Rng rng(3);
  const Tensor2 z = test::random_tensor(rng, 2, 3);
  const Tensor2 y = one_hot(std::vector<int>{1, 2}, 3);
  const LossResult d = loss_d(z, Tensor2(2, 0), y, 0);
  const LossResult ft = loss_ft(z, y);
  CHECK(d.value == ft.value);
  CHECK(d.grad == ft.grad);
}

TEST_CASE("matching teacher scores give zero gradient on the old range") {
  Rng rng(4);
  const Tensor2 z = test::random_tensor(rng, 3, 4);
  const Tensor2 s = sigmoid(z.slice_cols(0, 2));
  const LossResult r = loss_d(z, s, one_hot(std::vector<int>{2, 3, 2}, 4), 2);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.grad(i, 0) == 0.0);
    CHECK(r.grad(i, 1) == 0.0);
  }
}

TEST_CASE("distillation rejects width mismatches") {
  CHECK_THROWS_AS(loss_d(row({0, 0}), row({0.5, 0.5}), row({0, 1}), 1), ShapeError);
  CHECK_THROWS_AS(loss_d(row({0, 0}), row({0.5}), row({0, 1, 0}), 1), ShapeError);
}

TEST_CASE("multi-model distillation three-step toy") {
  const ClassBatchLayout layout({1, 2, 3});
  const Tensor2 z = row({0.2, -0.1, 0.4});
  TeacherOutputs t{{row({0.7}), row({0.5})}, {row({0.3}), row({0.5})}};
  const LossResult r = loss_mmd(z, t, row({0, 0, 1}), layout);
  // Independent per-logit oracle.
  const double oracle = bce_oracle(0.7, 0.2) + bce_oracle(0.3, -0.1) + bce_oracle(1.0, 0.4);
  CHECK(r.value == doctest::Approx(oracle).epsilon(1e-14));
  // 50-digit reference evaluation of the same sum.
  CHECK(std::fabs(r.value - 1.845550781855115358) < 1e-14);
  CHECK(std::fabs(r.grad(0, 0) - -0.15016600268752209) < 1e-15);
  CHECK(std::fabs(r.grad(0, 1) - 0.17502081252106001) < 1e-15);
  CHECK(std::fabs(r.grad(0, 2) - -0.40131233988754800) < 1e-15);
}

TEST_CASE("multi-model distillation with one step is classification on it") {
  Rng rng(5);
  const Tensor2 z = test::random_tensor(rng, 3, 2);
  const Tensor2 y = one_hot(std::vector<int>{0, 1, 1}, 2);
  const LossResult m = loss_mmd(z, {}, y, ClassBatchLayout({2}));
  CHECK(m.value == loss_ft(z, y).value);
}

TEST_CASE("multi-model distillation with one teacher equals sequential distillation") {
  Rng rng(6);
  for (int it = 0; it < 100; ++it) {
    const std::size_t n = 1 + rng.uniform_index(5);
    const std::size_t c1 = 1 + rng.uniform_index(4);
    const std::size_t c2 = c1 + 1 + rng.uniform_index(4);
    const Tensor2 z = test::random_tensor(rng, n, c2, 2.0);
    Tensor2 s(n, c1);
    for (double& v : s.data()) v = rng.uniform();
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) y.push_back(static_cast<int>(rng.uniform_index(c2)));
    const Tensor2 labels = one_hot(y, c2);
    const LossResult m = loss_mmd(z, {{s, s}}, labels, ClassBatchLayout({c1, c2}));
    const LossResult d = loss_d(z, s, labels, c1);
    CHECK(m.value == d.value);
    CHECK(m.grad == d.grad);
  }
}

TEST_CASE("multi-model distillation needs every teacher") {
  const ClassBatchLayout layout({1, 2, 3});
  TeacherOutputs one{{row({0.5}), row({0.5})}};
  CHECK_THROWS_AS(loss_mmd(row({0, 0, 0}), one, row({0, 0, 1}), layout), ShapeError);
  TeacherOutputs wide{{row({0.5, 0.5}), row({0.5})}, {row({0.5}), row({0.5})}};
  CHECK_THROWS_AS(loss_mmd(row({0, 0, 0}), wide, row({0, 0, 1}), layout), ShapeError);
}

TEST_CASE("zero-gradient fixpoint") {
  const ClassBatchLayout layout({2, 3});
  Tensor2 z = row({0.3, -1.2, 40.0});
  const Tensor2 s = sigmoid(z.slice_cols(0, 2));
  // sigmoid(40) rounds to exactly 1.
  const LossResult r = loss_mmd(z, {{s, s}}, row({0, 0, 1}), layout);
  for (double g : r.grad.data()) CHECK(g == 0.0);
}

TEST_CASE("auxiliary distillation small cases") {
  const ClassBatchLayout one({2});
  CHECK(loss_ad(row({0, 0}), {}, row({1, 0}), one, 0.0).value == 0.0);
  CHECK(loss_ad(row({0, 0}), {}, row({1, 0}), one, 0.5).value ==
        doctest::Approx(0.5 * (kLn2 + kLn2)).epsilon(1e-15));
}

TEST_CASE("auxiliary distillation double-targets old logits") {
  const ClassBatchLayout layout({1, 2});
  const double az0 = 0.35, az1 = -0.6, a_prime = 0.8, alpha = 0.5;
  // True class on the old logit: both targets land on logit 0.
  const LossResult r =
      loss_ad(row({az0, az1}), {{row({0.1}), row({a_prime})}}, row({1, 0}), layout, alpha);
  const double g0 = (sigmoid_oracle(az0) - a_prime) + alpha * (sigmoid_oracle(az0) - 1.0);
  const double g1 = alpha * (sigmoid_oracle(az1) - 0.0);
  CHECK(r.grad(0, 0) == doctest::Approx(g0).epsilon(1e-14));
  CHECK(r.grad(0, 1) == doctest::Approx(g1).epsilon(1e-14));
  const double v = bce_oracle(a_prime, az0) +
                   alpha * (bce_oracle(1.0, az0) + bce_oracle(0.0, az1));
  CHECK(r.value == doctest::Approx(v).epsilon(1e-14));
}

TEST_CASE("total loss combination") {
  Rng rng(8);
  const ClassBatchLayout layout({2, 4});
  const Tensor2 zm = test::random_tensor(rng, 3, 4);
  const Tensor2 za = test::random_tensor(rng, 3, 4);
  TeacherOutputs t{{Tensor2(3, 2, 0.4), Tensor2(3, 2, 0.7)}};
  const Tensor2 y = one_hot(std::vector<int>{3, 2, 0}, 4);
  const LossResult mmd = loss_mmd(zm, t, y, layout);
  const LossResult ad = loss_ad(za, t, y, layout, 0.5);
  const TotalLoss t0 = loss_total(mmd, ad, 0.0);
  CHECK(t0.value == mmd.value);
  CHECK(t0.d_main == mmd.grad);
  for (double g : t0.d_aux.data()) CHECK(g == 0.0);
  const TotalLoss t1 = loss_total(mmd, ad, 1.0);
  CHECK(t1.value == mmd.value + ad.value);
  CHECK(t1.d_aux == ad.grad);
  const TotalLoss t2 = loss_total(mmd, ad, 2.0);
  CHECK(t2.value - t1.value == doctest::Approx(ad.value).epsilon(1e-14));
}

TEST_CASE("losses are permutation-equivariant over the batch") {
  Rng rng(9);
  const ClassBatchLayout layout({2, 3, 5});
  const std::size_t n = 13;
  const Tensor2 z = test::random_tensor(rng, n, 5, 2.0);
  TeacherOutputs t;
  for (std::size_t k = 1; k < 3; ++k) {
    const auto [b, e] = layout.range(k);
    TeacherScores s{Tensor2(n, e - b), Tensor2(n, e - b)};
    for (double& v : s.main.data()) v = rng.uniform();
    for (double& v : s.aux.data()) v = rng.uniform();
    t.push_back(s);
  }
  std::vector<int> y;
  for (std::size_t i = 0; i < n; ++i) y.push_back(static_cast<int>(rng.uniform_index(5)));
  const Tensor2 labels = one_hot(y, 5);

  const auto perm = rng.permutation(n);
  auto permute = [&](const Tensor2& m) {
    Tensor2 out(m.rows(), m.cols());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(perm[i], j);
    return out;
  };
  TeacherOutputs tp;
  for (const auto& s : t) tp.push_back({permute(s.main), permute(s.aux)});

  const LossResult a = loss_mmd(z, t, labels, layout);
  const LossResult b = loss_mmd(permute(z), tp, permute(labels), layout);
  CHECK(std::fabs(a.value - b.value) <= 1e-12);
  CHECK(permute(a.grad) == b.grad);
  const LossResult c = loss_ad(z, t, labels, layout, 0.5);
  const LossResult d = loss_ad(permute(z), tp, permute(labels), layout, 0.5);
  CHECK(std::fabs(c.value - d.value) <= 1e-12);
}

TEST_CASE("every logit receives exactly one main target") {
  // With teacher scores set to a sentinel and labels to zero, the gradient
  // reveals which target each logit saw.
  const ClassBatchLayout layout({2, 3, 6});
  TeacherOutputs t{{Tensor2(1, 2, 0.25), Tensor2(1, 2, 0.0)},
                   {Tensor2(1, 1, 0.75), Tensor2(1, 1, 0.0)}};
  const LossResult r = loss_mmd(Tensor2(1, 6), t, Tensor2(1, 6), layout);
  const std::vector<double> expect{0.25, 0.25, -0.25, 0.5, 0.5, 0.5};
  for (std::size_t j = 0; j < 6; ++j) CHECK(r.grad(0, j) == expect[j]);
}

TEST_CASE("loss config validation") {
  CHECK_NOTHROW(LossConfig{}.validate());
  CHECK_THROWS_AS((LossConfig{-1.0, 1.0}.validate()), ConfigError);
  CHECK_THROWS_AS((LossConfig{0.5, -0.1}.validate()), ConfigError);
}

}  // TEST_SUITE
