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

#include "m2kd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "m2kd/error.hpp"
#include "m2kd/losses.hpp"
#include "m2kd/network.hpp"
#include "m2kd/rng.hpp"
#include "m2kd/trainer.hpp"

namespace m2kd {

double grad_check(const ScalarFunction& f, std::span<const double> point,
                  std::span<const double> analytic, double epsilon) {
  if (analytic.size() != point.size()) {
    throw ShapeError("grad_check: gradient and point sizes differ");
  }
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + epsilon;
    const double up = f(x);
    x[i] = saved - epsilon;
    const double down = f(x);
    x[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error("grad_check: function is not finite near coordinate " +
                  std::to_string(i));
    }
    const double central = (up - down) / (2.0 * epsilon);
    const double err = std::fabs(analytic[i] - central) /
                       std::max(1e-12, std::fabs(analytic[i]) + std::fabs(central));
    worst = std::max(worst, err);
  }
  return worst;
}

double GradcheckSummary::worst() const {
  return std::max({loss_d, loss_mmd, loss_ad, loss_total, network});
}

namespace {

struct LossInstance {
  ClassBatchLayout layout;
  Tensor2 labels;
  TeacherOutputs teachers;
  std::size_t n = 0;
};

LossInstance random_instance(Rng& rng, std::size_t min_steps) {
  LossInstance inst;
  inst.n = 1 + rng.uniform_index(4);
  const std::size_t steps = min_steps + rng.uniform_index(3);
  for (std::size_t s = 0; s < steps; ++s) inst.layout.append(1 + rng.uniform_index(3));
  const std::size_t c = inst.layout.total();
  std::vector<int> y;
  for (std::size_t i = 0; i < inst.n; ++i) y.push_back(static_cast<int>(rng.uniform_index(c)));
  inst.labels = one_hot(y, c);
  for (std::size_t k = 1; k < steps; ++k) {
    const auto [b, e] = inst.layout.range(k);
    TeacherScores t{Tensor2(inst.n, e - b), Tensor2(inst.n, e - b)};
    for (double& v : t.main.data()) v = 0.05 + 0.9 * rng.uniform();
    for (double& v : t.aux.data()) v = 0.05 + 0.9 * rng.uniform();
    inst.teachers.push_back(std::move(t));
  }
  return inst;
}

Tensor2 random_logits(Rng& rng, std::size_t n, std::size_t c) {
  Tensor2 z(n, c);
  for (double& v : z.data()) v = rng.normal(0.0, 1.5);
  return z;
}

Tensor2 as_tensor(std::span<const double> v, std::size_t rows, std::size_t cols) {
  return Tensor2(rows, cols, std::vector<double>(v.begin(), v.end()));
}

// Flips the largest-magnitude entry so the check must fail.
void maybe_flip(std::vector<double>& grad, bool inject) {
  if (!inject || grad.empty()) return;
  auto it = std::max_element(grad.begin(), grad.end(), [](double a, double b) {
    return std::fabs(a) < std::fabs(b);
  });
  *it = -*it;
}

std::vector<double> to_vec(const Tensor2& t) { return {t.data().begin(), t.data().end()}; }

// Flattened view of every network parameter, in a fixed order.
std::vector<double*> parameter_slots(Network& net) {
  std::vector<double*> slots;
  for (std::size_t n = 0; n < net.biases().size(); ++n) {
    for (double& w : net.store().layers()[n].weights.data()) slots.push_back(&w);
    for (double& b : net.biases()[n]) slots.push_back(&b);
  }
  for (Affine* h : {&net.main_head(), &net.aux_head()}) {
    for (double& w : h->weight.data()) slots.push_back(&w);
    for (double& b : h->bias) slots.push_back(&b);
  }
  return slots;
}

std::vector<double> flatten(const NetGrads& g) {
  std::vector<double> out;
  for (std::size_t n = 0; n < g.weights.size(); ++n) {
    out.insert(out.end(), g.weights[n].data().begin(), g.weights[n].data().end());
    out.insert(out.end(), g.biases[n].begin(), g.biases[n].end());
  }
  for (const Affine* h : {&g.main_head, &g.aux_head}) {
    out.insert(out.end(), h->weight.data().begin(), h->weight.data().end());
    out.insert(out.end(), h->bias.begin(), h->bias.end());
  }
  return out;
}

double check_network(Rng& rng, const GradcheckOptions& opt) {
  const std::size_t in = 3 + rng.uniform_index(3);
  NetConfig cfg{{in, 5, 4}, 1, rng.next_u64()};
  Rng init(cfg.seed);
  Network net(cfg, 1 + rng.uniform_index(2), init);
  net.expand_heads(1 + rng.uniform_index(2), init);
  for (Affine* h : {&net.main_head(), &net.aux_head()}) {
    for (double& w : h->weight.data()) w = rng.normal(0.0, 0.7);
    for (double& b : h->bias) b = rng.normal(0.0, 0.3);
  }
  for (auto& b : net.biases()) {
    for (double& v : b) v = rng.normal(0.0, 0.3);
  }
  const std::size_t n = 4;
  Tensor2 x(n, in);
  for (double& v : x.data()) v = rng.normal();
  std::vector<int> y;
  for (std::size_t i = 0; i < n; ++i) {
    y.push_back(static_cast<int>(rng.uniform_index(net.classes())));
  }
  const Tensor2 labels = one_hot(y, net.classes());
  TeacherOutputs teachers;
  const auto [b, e] = net.layout().range(1);
  TeacherScores t{Tensor2(n, e - b), Tensor2(n, e - b)};
  for (double& v : t.main.data()) v = 0.05 + 0.9 * rng.uniform();
  for (double& v : t.aux.data()) v = 0.05 + 0.9 * rng.uniform();
  teachers.push_back(std::move(t));
  const LossConfig loss;

  auto objective = [&](const Network& model, TotalLoss* out) {
    const ForwardTrace trace = model.forward(x);
    const LossResult mmd = loss_mmd(trace.main_logits, teachers, labels, model.layout());
    const LossResult ad =
        loss_ad(trace.aux_logits, teachers, labels, model.layout(), loss.alpha);
    TotalLoss total = loss_total(mmd, ad, loss.lambda);
    if (out != nullptr) *out = total;
    return total.value;
  };

  TotalLoss total;
  objective(net, &total);
  const ForwardTrace trace = net.forward(x);
  std::vector<double> analytic = flatten(net.backward(trace, total.d_main, total.d_aux));
  maybe_flip(analytic, opt.inject_fault);

  Network probe = net;
  const auto slots = parameter_slots(probe);
  std::vector<double> point;
  for (double* s : slots) point.push_back(*s);
  auto f = [&](std::span<const double> p) {
    for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = p[i];
    return objective(probe, nullptr);
  };
  return grad_check(f, point, analytic, opt.epsilon);
}

}  // namespace

GradcheckSummary run_gradcheck_suite(const GradcheckOptions& opt) {
  GradcheckSummary s;
  s.instances = opt.instances;
  Rng rng(opt.seed);
  for (unsigned it = 0; it < opt.instances; ++it) {
    // loss_d: one teacher covering the first C_o logits.
    {
      LossInstance inst = random_instance(rng, 1);
      const std::size_t c = inst.layout.total();
      const std::size_t old = rng.uniform_index(c + 1);
      Tensor2 scores(inst.n, old);
      for (double& v : scores.data()) v = 0.05 + 0.9 * rng.uniform();
      const Tensor2 z = random_logits(rng, inst.n, c);
      auto g = to_vec(loss_d(z, scores, inst.labels, old).grad);
      maybe_flip(g, opt.inject_fault);
      auto f = [&](std::span<const double> p) {
        return loss_d(as_tensor(p, inst.n, c), scores, inst.labels, old).value;
      };
      s.loss_d = std::max(s.loss_d, grad_check(f, z.data(), g, opt.epsilon));
    }
    // loss_mmd
    {
      LossInstance inst = random_instance(rng, 2);
      const std::size_t c = inst.layout.total();
      const Tensor2 z = random_logits(rng, inst.n, c);
      auto g = to_vec(loss_mmd(z, inst.teachers, inst.labels, inst.layout).grad);
      maybe_flip(g, opt.inject_fault);
      auto f = [&](std::span<const double> p) {
        return loss_mmd(as_tensor(p, inst.n, c), inst.teachers, inst.labels, inst.layout)
            .value;
      };
      s.loss_mmd = std::max(s.loss_mmd, grad_check(f, z.data(), g, opt.epsilon));
    }
    // loss_ad
    {
      LossInstance inst = random_instance(rng, 2);
      const std::size_t c = inst.layout.total();
      const double alpha = 0.1 + rng.uniform();
      const Tensor2 z = random_logits(rng, inst.n, c);
      auto g = to_vec(loss_ad(z, inst.teachers, inst.labels, inst.layout, alpha).grad);
      maybe_flip(g, opt.inject_fault);
      auto f = [&](std::span<const double> p) {
        return loss_ad(as_tensor(p, inst.n, c), inst.teachers, inst.labels, inst.layout,
                       alpha)
            .value;
      };
      s.loss_ad = std::max(s.loss_ad, grad_check(f, z.data(), g, opt.epsilon));
    }
    // loss_total over the concatenated main and aux logits.
    {
      LossInstance inst = random_instance(rng, 2);
      const std::size_t c = inst.layout.total();
      const std::size_t half = inst.n * c;
      const double lambda = 0.1 + 2.0 * rng.uniform();
      const LossConfig cfg{0.5, lambda};
      const Tensor2 zm = random_logits(rng, inst.n, c);
      const Tensor2 za = random_logits(rng, inst.n, c);
      auto eval = [&](const Tensor2& m, const Tensor2& a) {
        return loss_total(loss_mmd(m, inst.teachers, inst.labels, inst.layout),
                          loss_ad(a, inst.teachers, inst.labels, inst.layout, cfg.alpha),
                          cfg.lambda);
      };
      const TotalLoss t = eval(zm, za);
      std::vector<double> g = to_vec(t.d_main);
      const auto ga = to_vec(t.d_aux);
      g.insert(g.end(), ga.begin(), ga.end());
      maybe_flip(g, opt.inject_fault);
      std::vector<double> point = to_vec(zm);
      const auto pa = to_vec(za);
      point.insert(point.end(), pa.begin(), pa.end());
      auto f = [&](std::span<const double> p) {
        return eval(as_tensor(p.first(half), inst.n, c),
                    as_tensor(p.subspan(half), inst.n, c))
            .value;
      };
      s.loss_total = std::max(s.loss_total, grad_check(f, point, g, opt.epsilon));
    }
    s.network = std::max(s.network, check_network(rng, opt));
  }
  return s;
}

}  // namespace m2kd
