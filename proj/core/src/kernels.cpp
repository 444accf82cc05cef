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

#include "msfk/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "msfk/error.hpp"

namespace msfk::kernels {

namespace {

void require_matrix(const Tensor& m, const char* op) {
  if (m.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_to_string(m.shape()));
  }
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                       shape_to_string(b.shape()));
}

template <typename Fn>
Tensor map(const Tensor& m, Fn fn) {
  std::vector<float> out(m.size());
  auto in = m.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(in[i]);
  return Tensor(m.shape(), std::move(out));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) mismatch("matmul", a, b);
  const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
  auto ad = a.data();
  auto bd = b.data();
  std::vector<float> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += double(ad[i * k + p]) * double(bd[p * c + j]);
      out[i * c + j] = static_cast<float>(acc);
    }
  }
  return Tensor({r, c}, std::move(out));
}

Tensor matmul_transposed(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_transposed");
  require_matrix(b, "matmul_transposed");
  if (a.cols() != b.cols()) mismatch("matmul_transposed", a, b);
  const std::size_t r = a.rows(), k = a.cols(), c = b.rows();
  auto ad = a.data();
  auto bd = b.data();
  std::vector<float> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += double(ad[i * k + p]) * double(bd[j * k + p]);
      out[i * c + j] = static_cast<float>(acc);
    }
  }
  return Tensor({r, c}, std::move(out));
}

Tensor transpose(const Tensor& m) {
  require_matrix(m, "transpose");
  const std::size_t r = m.rows(), c = m.cols();
  auto d = m.data();
  std::vector<float> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = d[i * c + j];
  return Tensor({c, r}, std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("add", a, b);
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(double(a[i]) + double(b[i]));
  return Tensor(a.shape(), std::move(out));
}

Tensor divide(const Tensor& m, double divisor) {
  return map(m, [divisor](float x) { return static_cast<float>(double(x) / divisor); });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix(x, "linear");
  require_matrix(weight, "linear");
  if (x.cols() != weight.rows()) mismatch("linear", x, weight);
  if (bias.rank() != 1 || bias.size() != weight.cols()) mismatch("linear bias", weight, bias);
  const std::size_t n = x.rows(), in = x.cols(), out_dim = weight.cols();
  auto xd = x.data();
  auto wd = weight.data();
  std::vector<float> out(n * out_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < out_dim; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < in; ++p) acc += double(xd[i * in + p]) * double(wd[p * out_dim + j]);
      acc += double(bias[j]);
      out[i * out_dim + j] = static_cast<float>(acc);
    }
  }
  return Tensor({n, out_dim}, std::move(out));
}

Tensor relu(const Tensor& m) {
  return map(m, [](float x) { return x > 0.0F ? x : 0.0F; });
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor sigmoid(const Tensor& m) {
  return map(m, [](float x) { return static_cast<float>(logistic(double(x))); });
}

Tensor softmax_rows(const Tensor& m) {
  require_matrix(m, "softmax_rows");
  const std::size_t r = m.rows(), c = m.cols();
  auto d = m.data();
  std::vector<float> out(r * c);
  std::vector<double> e(c);
  for (std::size_t i = 0; i < r; ++i) {
    float peak = d[i * c];
    for (std::size_t j = 1; j < c; ++j) peak = std::max(peak, d[i * c + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      e[j] = std::exp(double(d[i * c + j]) - double(peak));
      sum += e[j];
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = static_cast<float>(e[j] / sum);
  }
  return Tensor({r, c}, std::move(out));
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  require_matrix(q, "attention");
  require_matrix(k, "attention");
  require_matrix(v, "attention");
  if (q.cols() != k.cols()) mismatch("attention q/k", q, k);
  if (k.rows() != v.rows()) mismatch("attention k/v", k, v);
  Tensor logits = divide(matmul_transposed(q, k), std::sqrt(double(q.cols())));
  return matmul(softmax_rows(logits), v);
}

Tensor layer_norm(const Tensor& x, double eps) {
  require_matrix(x, "layer_norm");
  const std::size_t r = x.rows(), c = x.cols();
  auto d = x.data();
  std::vector<float> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += double(d[i * c + j]);
    mean /= double(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double dev = double(d[i * c + j]) - mean;
      var += dev * dev;
    }
    var /= double(c);
    double denom = std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = static_cast<float>((double(d[i * c + j]) - mean) / denom);
    }
  }
  return Tensor({r, c}, std::move(out));
}

Tensor layer_norm(const Tensor& x, double eps, const Tensor& gain, const Tensor& bias) {
  Tensor normed = layer_norm(x, eps);
  const std::size_t c = normed.cols();
  if (gain.rank() != 1 || gain.size() != c) mismatch("layer_norm gain", x, gain);
  if (bias.rank() != 1 || bias.size() != c) mismatch("layer_norm bias", x, bias);
  std::vector<float> out(normed.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(double(normed[i]) * double(gain[i % c]) + double(bias[i % c]));
  }
  return Tensor(normed.shape(), std::move(out));
}

MaxResult elementwise_max(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("elementwise_max", a, b);
  std::vector<float> values(a.size());
  std::vector<float> mask(a.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    bool second = b[i] > a[i];
    values[i] = second ? b[i] : a[i];
    mask[i] = second ? 1.0F : 0.0F;
  }
  return {Tensor(a.shape(), std::move(values)), Tensor(a.shape(), std::move(mask))};
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t rows = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != c) mismatch("concat_rows", parts.front(), p);
    rows += p.rows();
  }
  std::vector<float> out;
  out.reserve(rows * c);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return Tensor({rows, c}, std::move(out));
}

Tensor concat_rows(const Tensor& top, const Tensor& bottom) {
  const Tensor parts[] = {top, bottom};
  return concat_rows(std::span<const Tensor>(parts));
}

Tensor slice_rows(const Tensor& m, std::size_t begin, std::size_t end) {
  require_matrix(m, "slice_rows");
  if (begin >= end || end > m.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for " + shape_to_string(m.shape()));
  }
  const std::size_t c = m.cols();
  auto d = m.data();
  return Tensor({end - begin, c}, std::vector<float>(d.begin() + begin * c, d.begin() + end * c));
}

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> indices) {
  require_matrix(m, "gather_rows");
  if (indices.empty()) throw DimensionError("gather_rows: no indices");
  const std::size_t c = m.cols();
  std::vector<float> out;
  out.reserve(indices.size() * c);
  for (std::size_t idx : indices) {
    if (idx >= m.rows()) throw DimensionError("gather_rows: index " + std::to_string(idx) + " out of range");
    auto r = m.row(idx);
    out.insert(out.end(), r.begin(), r.end());
  }
  return Tensor({indices.size(), c}, std::move(out));
}

std::vector<float> row_max(const Tensor& m) {
  require_matrix(m, "row_max");
  std::vector<float> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    out[i] = *std::max_element(r.begin(), r.end());
  }
  return out;
}

bool all_finite(const Tensor& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](float x) { return std::isfinite(x); });
}

}  // namespace msfk::kernels
