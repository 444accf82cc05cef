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

#include <cmath>

#include "doctest.h"
#include "instances.hpp"
#include "msfk/error.hpp"
#include "msfk/gradcheck.hpp"
#include "msfk/kernels.hpp"

using namespace msfk;
namespace k = msfk::kernels;

TEST_CASE("tensor construction validates shape") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor({}, {}), DimensionError);
  Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1, 2) == 6.0F);
  CHECK(m.reshaped({3, 2}).at(2, 1) == 6.0F);
  CHECK_THROWS_AS(m.reshaped({4, 2}), DimensionError);
  CHECK_THROWS_AS(Tensor::vector({1, 2}).rows(), DimensionError);
}

TEST_CASE("matmul") {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(k::matmul(Tensor::matrix({{1, 0}, {0, 1}}), a) == a);
  CHECK(k::matmul(Tensor::matrix({{1, 0}, {0, 1}}), Tensor::matrix({{0, 1}, {1, 0}})) ==
        Tensor::matrix({{0, 1}, {1, 0}}));
  CHECK(k::matmul(a, Tensor::matrix({{5}, {6}})) == Tensor::matrix({{17}, {39}}));

  SUBCASE("mismatch names both shapes") {
    try {
      k::matmul(a, Tensor::matrix({{1, 2, 3}}));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      std::string msg = e.what();
      CHECK(msg.find("[2x2]") != std::string::npos);
      CHECK(msg.find("[1x3]") != std::string::npos);
    }
  }
  SUBCASE("transposed form agrees") {
    Rng rng(3);
    Tensor x = testing::random_matrix(rng, 5, 4);
    Tensor y = testing::random_matrix(rng, 3, 4);
    CHECK(k::matmul_transposed(x, y) == k::matmul(x, k::transpose(y)));
  }
}

TEST_CASE("softmax_rows") {
  Tensor half = k::softmax_rows(Tensor::matrix({{0, 0}}));
  CHECK(half == Tensor::matrix({{0.5F, 0.5F}}));
  CHECK(k::softmax_rows(Tensor::matrix({{1000, 1000}})) == Tensor::matrix({{0.5F, 0.5F}}));
  Tensor q = k::softmax_rows(Tensor::matrix({{0.0F, static_cast<float>(std::log(3.0))}}));
  CHECK(q.at(0, 0) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(q.at(0, 1) == doctest::Approx(0.75).epsilon(1e-6));

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor p = k::softmax_rows(testing::random_matrix(rng, 4, 6, -30.0, 30.0));
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double s = 0.0;
      for (float v : p.row(r)) {
        CHECK(v >= 0.0F);
        s += v;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("scaled_dot_attention") {
  SUBCASE("equal logits average the values") {
    Tensor q = Tensor::matrix({{0, 0}});
    Tensor key = Tensor::matrix({{1, 0}, {0, 1}, {1, 1}});
    Tensor v = Tensor::matrix({{3, 0}, {0, 6}, {3, 3}});
    Tensor out = k::scaled_dot_attention(q, key, v);
    CHECK(out.at(0, 0) == doctest::Approx(2.0));
    CHECK(out.at(0, 1) == doctest::Approx(3.0));
  }
  SUBCASE("matches softmax-then-matmul composition") {
    Tensor q = Tensor::matrix({{1, 2}, {-1, 0.5F}});
    Tensor key = Tensor::matrix({{0.3F, -0.2F}, {1, 1}});
    Tensor v = Tensor::matrix({{1, 2}, {3, 4}});
    Tensor logits = k::matmul(q, k::transpose(key));
    Tensor scaled = k::divide(logits, std::sqrt(2.0));
    CHECK(k::scaled_dot_attention(q, key, v) == k::matmul(k::softmax_rows(scaled), v));
  }
  CHECK_THROWS_AS(k::scaled_dot_attention(Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 2, 3}}),
                                          Tensor::matrix({{1}})),
                  DimensionError);
  CHECK_THROWS_AS(k::scaled_dot_attention(Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 2}}),
                                          Tensor::matrix({{1}, {2}})),
                  DimensionError);
}

TEST_CASE("layer_norm") {
  CHECK(k::layer_norm(Tensor::matrix({{5, 5, 5, 5}}), 1e-5) == Tensor::matrix({{0, 0, 0, 0}}));
  Tensor unit = k::layer_norm(Tensor::matrix({{1, -1}}), 0.0);
  CHECK(unit == Tensor::matrix({{1, -1}}));
  Tensor affine = k::layer_norm(Tensor::matrix({{5, 5}}), 1e-5, Tensor::vector({2, 2}), Tensor::vector({1, -1}));
  CHECK(affine == Tensor::matrix({{1, -1}}));
}

TEST_CASE("elementwise_max") {
  Tensor a = Tensor::matrix({{0.9F, 0.1F}});
  auto same = k::elementwise_max(a, a);
  CHECK(same.values == a);
  CHECK(same.winner_mask == Tensor::matrix({{0, 0}}));
  auto r = k::elementwise_max(a, Tensor::matrix({{0.5F, 0.7F}}));
  CHECK(r.values == Tensor::matrix({{0.9F, 0.7F}}));
  CHECK(r.winner_mask == Tensor::matrix({{0, 1}}));
  CHECK_THROWS_AS(k::elementwise_max(a, Tensor::matrix({{1}})), DimensionError);
}

TEST_CASE("elementwise ops reject shape mismatch") {
  CHECK_THROWS_AS(k::add(Tensor::matrix({{1, 2}}), Tensor::matrix({{1}, {2}})), DimensionError);
  CHECK_THROWS_AS(k::linear(Tensor::matrix({{1, 2}}), Tensor::matrix({{1}, {2}}), Tensor::vector({1, 2})),
                  DimensionError);
  CHECK_THROWS_AS(k::concat_rows(Tensor::matrix({{1, 2}}), Tensor::matrix({{1}})), DimensionError);
  CHECK_THROWS_AS(k::slice_rows(Tensor::matrix({{1, 2}}), 0, 2), DimensionError);
}

TEST_CASE("finite differences") {
  using gradcheck::finite_diff_grad;
  auto sq = [](const Tensor& x) {
    double s = 0.0;
    for (float v : x.data()) s += double(v) * double(v);
    return s;
  };
  Tensor g = finite_diff_grad(sq, Tensor::vector({1, 2}), 1e-3);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-4));

  auto prod = [](const Tensor& x) { return double(x[0]) * double(x[1]); };
  Tensor p = finite_diff_grad(prod, Tensor::vector({3, 5}), 1e-3);
  CHECK(p[0] == doctest::Approx(5.0).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(3.0).epsilon(1e-4));

  auto total = [](const Tensor& x) {
    double s = 0.0;
    const Tensor p = k::softmax_rows(x);
    for (float v : p.data()) s += v;
    return s;
  };
  Tensor z = finite_diff_grad(total, Tensor::matrix({{0.1F, -0.4F, 0.7F}, {1, 2, 3}}), 1e-3);
  for (float v : z.data()) CHECK(std::fabs(v) < 1e-4);
}
