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

#include "doctest.h"
#include "instances.hpp"
#include "msfk/error.hpp"
#include "msfk/geometry.hpp"
#include "oracles.hpp"

using namespace msfk;

TEST_CASE("iou") {
  BBox a{0, 0, 10, 10};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {10, 10, 20, 20}) == 0.0);
  CHECK(iou(a, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0));
  CHECK(iou(a, {3, 3, 3, 8}) == 0.0);
  CHECK(iou({2, 2, 2, 2}, {2, 2, 2, 2}) == 0.0);
}

TEST_CASE("iou properties") {
  Rng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    BBox a = testing::random_box(rng), b = testing::random_box(rng);
    double v = iou(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == iou(b, a));
  }
}

namespace {

Detection det(BBox b, double score, ClassId cls) { return {b, score, cls, 1}; }

}  // namespace

TEST_CASE("class_nms examples") {
  BBox box{0, 0, 10, 10};
  auto one = class_nms(std::vector<Detection>{det(box, 0.9, 1), det(box, 0.8, 1)}, 0.5);
  REQUIRE(one.size() == 1);
  CHECK(one[0].score == 0.9);

  CHECK(class_nms(std::vector<Detection>{det(box, 0.9, 1), det(box, 0.8, 2)}, 0.5).size() == 2);

  // A–C cannot be disjoint while both overlap B at 0.6; 0.2 is below the
  // threshold, which is what the chain case needs.
  BBox a{0, 0, 6, 10}, b{0, 0, 10, 10}, c{4, 0, 10, 10};
  REQUIRE(iou(a, b) == doctest::Approx(0.6));
  REQUIRE(iou(b, c) == doctest::Approx(0.6));
  REQUIRE(iou(a, c) == doctest::Approx(2.0 / 10.0));
  auto chain = class_nms(std::vector<Detection>{det(a, 0.9, 1), det(b, 0.8, 1), det(c, 0.7, 1)}, 0.5);
  REQUIRE(chain.size() == 2);
  CHECK(chain[0].box == a);
  CHECK(chain[1].box == c);

  CHECK(class_nms({}, 0.5).empty());
  CHECK_THROWS_AS(class_nms({}, 0.0), ParameterError);
  CHECK_THROWS_AS(class_nms({}, 1.5), ParameterError);
}

TEST_CASE("class_nms against brute force") {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    auto dets = testing::random_detections(rng, uniform_index(rng, 25), 1, 3);
    double t = 0.3 + 0.1 * double(uniform_index(rng, 6));
    auto kept = class_nms(dets, t);
    CHECK(kept == oracle::nms(dets, t));
    CHECK(class_nms(kept, t) == kept);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (i > 0) CHECK(kept[i - 1].score >= kept[i].score);
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        if (kept[i].class_id == kept[j].class_id) CHECK(iou(kept[i].box, kept[j].box) < t);
      }
    }
  }
}
