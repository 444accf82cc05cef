/*
Copyright 2026 The msfk Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include "msfk/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "msfk/error.hpp"
#include "msfk/fusion_head.hpp"
#include "msfk/kernels.hpp"
#include "msfk/random.hpp"

namespace msfk::gradcheck {

namespace k = msfk::kernels;

namespace {

Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("hadamard: shape mismatch");
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(double(a[i]) * double(b[i]));
  return Tensor(a.shape(), std::move(out));
}

Tensor complement(const Tensor& mask) {
  std::vector<float> out(mask.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0F - mask[i];
  return Tensor(mask.shape(), std::move(out));
}

Tensor scaled(const Tensor& t, double factor) {
  std::vector<float> out(t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(double(t[i]) * factor);
  return Tensor(t.shape(), std::move(out));
}

Tensor random_tensor(Rng& rng, Shape shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<float> data(n);
  for (float& v : data) v = static_cast<float>(uniform_real(rng, -1.0, 1.0));
  return Tensor(std::move(shape), std::move(data));
}

/// Smallest |a - b| across elements; keeps fixtures away from the max kink.
double min_gap(const Tensor& a, const Tensor& b) {
  double gap = INFINITY;
  for (std::size_t i = 0; i < a.size(); ++i) gap = std::min(gap, std::fabs(double(a[i]) - double(b[i])));
  return gap;
}

}  // namespace

Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double h) {
  std::vector<float> base(x.data().begin(), x.data().end());
  std::vector<float> grad(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<float> plus = base;
    std::vector<float> minus = base;
    plus[i] = static_cast<float>(double(base[i]) + h);
    minus[i] = static_cast<float>(double(base[i]) - h);
    double width = double(plus[i]) - double(minus[i]);
    double fp = f(Tensor(x.shape(), std::move(plus)));
    double fm = f(Tensor(x.shape(), std::move(minus)));
    grad[i] = static_cast<float>((fp - fm) / width);
  }
  return Tensor(x.shape(), std::move(grad));
}

double probe(const Tensor& output, const Tensor& upstream) {
  if (output.shape() != upstream.shape()) {
    throw DimensionError("probe: output " + shape_to_string(output.shape()) + " vs upstream " +
                         shape_to_string(upstream.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) acc += double(output[i]) * double(upstream[i]);
  return acc;
}

PairGrad sum_fusion_grad(const Tensor& upstream) { return {upstream, upstream}; }

PairGrad concat_fusion_grad(const Tensor& upstream, std::size_t rows_first) {
  return {k::slice_rows(upstream, 0, rows_first), k::slice_rows(upstream, rows_first, upstream.rows())};
}

PairGrad max_fusion_grad(const Tensor& a, const Tensor& b, const Tensor& upstream) {
  Tensor mask = k::elementwise_max(a, b).winner_mask;
  return {hadamard(upstream, complement(mask)), hadamard(upstream, mask)};
}

PairGrad affinity_grad(const Tensor& f, const Tensor& t, const Tensor& upstream) {
  return {k::matmul(upstream, t), k::matmul(k::transpose(upstream), f)};
}

QueryLogitGrad class_logits_grad(const Tensor& q, const Tensor& t_rgb, const Tensor& t_ir, const Tensor& upstream) {
  Tensor mask = k::elementwise_max(k::matmul_transposed(q, t_rgb), k::matmul_transposed(q, t_ir)).winner_mask;
  Tensor g_rgb = hadamard(upstream, complement(mask));
  Tensor g_ir = hadamard(upstream, mask);
  return {k::add(k::matmul(g_rgb, t_rgb), k::matmul(g_ir, t_ir)), k::matmul(k::transpose(g_rgb), q),
          k::matmul(k::transpose(g_ir), q)};
}

double relative_error(const Tensor& analytic, const Tensor& numeric) {
  if (analytic.shape() != numeric.shape()) throw DimensionError("relative_error: shape mismatch");
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    double a = analytic[i], n = numeric[i];
    diff += (a - n) * (a - n);
    na += a * a;
    nn += n * n;
  }
  double denom = std::sqrt(std::max(na, nn));
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

std::vector<CheckResult> run_suite(const SuiteOptions& opts) {
  Rng rng(opts.seed);
  const Shape fixture{4, 3};
  const double factor = opts.corrupt ? 1.5 : 1.0;
  std::vector<CheckResult> results;

  auto record = [&](std::string name, std::initializer_list<std::pair<Tensor, Tensor>> pairs) {
    CheckResult r;
    r.name = std::move(name);
    for (const auto& [analytic, numeric] : pairs) {
      r.max_relative_error = std::max(r.max_relative_error, relative_error(scaled(analytic, factor), numeric));
    }
    r.passed = r.max_relative_error <= opts.tolerance;
    results.push_back(std::move(r));
  };

  {
    Tensor a = random_tensor(rng, fixture), b = random_tensor(rng, fixture), g = random_tensor(rng, fixture);
    PairGrad an = sum_fusion_grad(g);
    auto na = finite_diff_grad([&](const Tensor& x) { return probe(k::add(x, b), g); }, a, opts.step);
    auto nb = finite_diff_grad([&](const Tensor& x) { return probe(k::add(a, x), g); }, b, opts.step);
    record("sum_fusion", {{an.first, na}, {an.second, nb}});
  }
  {
    Tensor a = random_tensor(rng, fixture), b = random_tensor(rng, fixture);
    Tensor g = random_tensor(rng, {8, 3});
    PairGrad an = concat_fusion_grad(g, a.rows());
    auto na = finite_diff_grad([&](const Tensor& x) { return probe(k::concat_rows(x, b), g); }, a, opts.step);
    auto nb = finite_diff_grad([&](const Tensor& x) { return probe(k::concat_rows(a, x), g); }, b, opts.step);
    record("concat_fusion", {{an.first, na}, {an.second, nb}});
  }
  {
    Tensor a = random_tensor(rng, fixture), b = random_tensor(rng, fixture);
    while (min_gap(a, b) < 0.05) b = random_tensor(rng, fixture);
    Tensor g = random_tensor(rng, fixture);
    PairGrad an = max_fusion_grad(a, b, g);
    auto na = finite_diff_grad([&](const Tensor& x) { return probe(k::elementwise_max(x, b).values, g); }, a,
                               opts.step);
    auto nb = finite_diff_grad([&](const Tensor& x) { return probe(k::elementwise_max(a, x).values, g); }, b,
                               opts.step);
    record("max_fusion", {{an.first, na}, {an.second, nb}});
  }
  {
    Tensor f = random_tensor(rng, fixture), t = random_tensor(rng, fixture), g = random_tensor(rng, {4, 4});
    PairGrad an = affinity_grad(f, t, g);
    auto text = [](const Tensor& tokens) { return head::TextEmbeddings{tokens, {0, 1, 2, 3}, {}}; };
    auto nf = finite_diff_grad([&](const Tensor& x) { return probe(head::affinity(x, text(t)), g); }, f, opts.step);
    auto nt = finite_diff_grad([&](const Tensor& x) { return probe(head::affinity(f, text(x)), g); }, t, opts.step);
    record("affinity", {{an.first, nf}, {an.second, nt}});
  }
  {
    Tensor q = random_tensor(rng, fixture), tr = random_tensor(rng, fixture), ti = random_tensor(rng, fixture);
    while (min_gap(k::matmul_transposed(q, tr), k::matmul_transposed(q, ti)) < 0.05) ti = random_tensor(rng, fixture);
    Tensor g = random_tensor(rng, {4, 4});
    auto text = [](const Tensor& tokens) { return head::TextEmbeddings{tokens, {0, 1, 2, 3}, {}}; };
    auto logits = [&](const Tensor& qq, const Tensor& a, const Tensor& b) {
      return probe(head::class_logits_query(qq, text(a), text(b)), g);
    };
    QueryLogitGrad an = class_logits_grad(q, tr, ti, g);
    auto nq = finite_diff_grad([&](const Tensor& x) { return logits(x, tr, ti); }, q, opts.step);
    auto nr = finite_diff_grad([&](const Tensor& x) { return logits(q, x, ti); }, tr, opts.step);
    auto ni = finite_diff_grad([&](const Tensor& x) { return logits(q, tr, x); }, ti, opts.step);
    record("class_logits_max", {{an.queries, nq}, {an.text_rgb, nr}, {an.text_ir, ni}});
  }
  return results;
}

}  // namespace msfk::gradcheck
