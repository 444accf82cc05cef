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

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "msfk/tensor.hpp"

/// Analytic input gradients of the fusion operators and a central-difference
/// checker for them.
///
/// Every gradient here is of the scalar probe L = Σ upstream ⊙ output, so the
/// analytic result is a vector-Jacobian product.
namespace msfk::gradcheck {

using ScalarFn = std::function<double(const Tensor&)>;

/// Central differences per coordinate. The step actually taken is measured
/// after float rounding of x ± h, so the quotient uses that width.
Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double h);

/// Σ upstream ⊙ output, accumulated in double.
double probe(const Tensor& output, const Tensor& upstream);

struct PairGrad {
  Tensor first;
  Tensor second;
};

/// out = a + b.
PairGrad sum_fusion_grad(const Tensor& upstream);
/// out = rows(a) then rows(b).
PairGrad concat_fusion_grad(const Tensor& upstream, std::size_t rows_first);
/// out = max(a, b); the subgradient goes to the winner recorded in the mask.
PairGrad max_fusion_grad(const Tensor& a, const Tensor& b, const Tensor& upstream);
/// out = f · tᵀ.
PairGrad affinity_grad(const Tensor& f, const Tensor& t, const Tensor& upstream);

struct QueryLogitGrad {
  Tensor queries;
  Tensor text_rgb;
  Tensor text_ir;
};

/// out = max(q · t_rgbᵀ, q · t_irᵀ).
QueryLogitGrad class_logits_grad(const Tensor& q, const Tensor& t_rgb, const Tensor& t_ir,
                                 const Tensor& upstream);

/// ‖a − n‖₂ / max(‖a‖₂, ‖n‖₂); 0 when both vanish.
double relative_error(const Tensor& analytic, const Tensor& numeric);

struct CheckResult {
  std::string name;
  double max_relative_error = 0.0;
  bool passed = false;
};

struct SuiteOptions {
  std::uint64_t seed = 0;
  double step = 1e-3;
  double tolerance = 1e-3;
  /// Scales every analytic gradient by 1.5 as a negative control.
  bool corrupt = false;
};

/// Checks sum fusion, concat fusion, max fusion, affinity and the max-fused
/// query logits on seeded 4×3 fixtures.
std::vector<CheckResult> run_suite(const SuiteOptions& opts);

}  // namespace msfk::gradcheck
