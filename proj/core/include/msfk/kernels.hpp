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

#include <cstddef>
#include <span>
#include <vector>

#include "msfk/tensor.hpp"

/// Dense arithmetic over 2-D float32 tensors.
///
/// Every kernel accumulates in double and rounds to float32 exactly once per
/// output element, summing in ascending index order. Golden fixtures depend on
/// this: the reference generator reproduces the same rounding points.
/// No broadcasting anywhere; mismatched shapes throw DimensionError.
namespace msfk::kernels {

Tensor matmul(const Tensor& a, const Tensor& b);

/// a · bᵀ without materialising the transpose.
Tensor matmul_transposed(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& m);

/// Elementwise sum of two same-shape tensors (any rank).
Tensor add(const Tensor& a, const Tensor& b);

/// Every element divided by `divisor` (computed in double).
Tensor divide(const Tensor& m, double divisor);

/// x · W + b for x: n×in, W: in×out, b: out (rank 1).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& m);
Tensor sigmoid(const Tensor& m);

/// Scalar logistic in double; used where a score leaves the tensor domain.
double logistic(double x);

Tensor softmax_rows(const Tensor& m);

/// softmax(q·kᵀ / √d) · v, composed from matmul_transposed, divide,
/// softmax_rows and matmul.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// Per-row standardisation with unit gain and zero bias.
Tensor layer_norm(const Tensor& x, double eps);
Tensor layer_norm(const Tensor& x, double eps, const Tensor& gain, const Tensor& bias);

struct MaxResult {
  Tensor values;
  /// 0 where `a` won (ties included), 1 where `b` won.
  Tensor winner_mask;
};

MaxResult elementwise_max(const Tensor& a, const Tensor& b);

/// Stacks matrices with equal column counts.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_rows(const Tensor& top, const Tensor& bottom);

Tensor slice_rows(const Tensor& m, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& m, std::span<const std::size_t> indices);

/// Maximum of each row.
std::vector<float> row_max(const Tensor& m);

bool all_finite(const Tensor& m);

}  // namespace msfk::kernels
