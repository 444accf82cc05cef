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

#include <filesystem>

#include "doctest.h"
#include "instances.hpp"
#include "msfk/error.hpp"
#include "msfk/evaluator.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace msfk;
using namespace msfk::eval;

namespace {

Dataset one_image(std::vector<Annotation> anns, int classes = 1) {
  return Dataset({{1, "a", "b", 100, 100}}, std::move(anns), testing::numbered_categories(classes));
}

Annotation gt(AnnotationId id, ClassId cls, BBox b) {
  Annotation a;
  a.id = id;
  a.image_id = 1;
  a.class_id = cls;
  a.x = b.x1;
  a.y = b.y1;
  a.w = b.width();
  a.h = b.height();
  return a;
}

}  // namespace

TEST_CASE("greedy matching") {
  BBox g{0, 0, 10, 10};
  std::vector<GroundTruth> one{{g, 1, 1}};
  BBox shifted{0, 0, 10, 16};  // IoU 100/160 = 0.625
  CHECK(match_detections(std::vector<Detection>{{shifted, 0.5, 1, 1}}, one, 0.5) == std::vector<bool>{true});

  std::vector<Detection> twins{{g, 0.4, 1, 1}, {g, 0.9, 1, 1}};
  CHECK(match_detections(twins, one, 0.5) == std::vector<bool>{false, true});

  // The top detection grabs the box the second one needs; an optimal
  // assignment would have matched both.
  std::vector<GroundTruth> two{{{0, 0, 10, 10}, 1, 1}, {{4, 0, 14, 10}, 1, 1}};
  std::vector<Detection> three{
      {{1, 0, 11, 10}, 0.9, 1, 1},  // IoU 0.818 with first, 0.538 with second
      {{0, 0, 10, 10}, 0.8, 1, 1},  // 1.0 with first, 0.429 with second
      {{30, 30, 40, 40}, 0.7, 1, 1},
  };
  CHECK(iou(three[0].box, two[1].box) >= 0.5);
  CHECK(iou(three[1].box, two[1].box) < 0.5);
  CHECK(match_detections(three, two, 0.5) == std::vector<bool>{true, false, false});

  std::vector<GroundTruth> tie{{{0, 0, 10, 10}, 1, 1}, {{0, 0, 10, 10}, 1, 1}};
  std::vector<Detection> single{{{0, 0, 10, 10}, 0.9, 1, 1}, {{0, 0, 10, 10}, 0.8, 1, 1}};
  CHECK(match_detections(single, tie, 0.5) == std::vector<bool>{true, true});
}

TEST_CASE("average precision analytic cases") {
  std::vector<ScoredLabel> perfect{{0.9, true}};
  CHECK(*average_precision(perfect, 1, 101) == 1.0);
  std::vector<ScoredLabel> tp_fp{{0.9, true}, {0.8, false}};
  CHECK(*average_precision(tp_fp, 1, 101) == 1.0);
  std::vector<ScoredLabel> fp_tp{{0.95, false}, {0.9, true}};
  CHECK(*average_precision(fp_tp, 1, 101) == 0.5);
  CHECK_FALSE(average_precision({}, 0, 101).has_value());
  CHECK(*average_precision(fp_tp, 0, 101) == 0.0);
  CHECK(*average_precision({}, 3, 101) == 0.0);
}

TEST_CASE("evaluate simple reports") {
  std::vector<Annotation> anns{gt(1, 1, {0, 0, 10, 10}), gt(2, 2, {20, 20, 40, 50}), gt(3, 2, {60, 60, 70, 90})};
  Dataset ds = one_image(anns, 3);
  std::vector<Detection> perfect;
  for (const Annotation& a : anns) perfect.push_back({a.box(), 1.0, a.class_id, 1});
  EvalReport r = evaluate(ds, perfect);
  CHECK(r.map == 1.0);
  CHECK(r.map50 == 1.0);
  CHECK(r.map75 == 1.0);
  CHECK(r.excluded == std::vector<ClassId>{3});

  EvalReport empty = evaluate(ds, {});
  CHECK(empty.map == 0.0);
  for (const ClassResult& c : empty.classes) {
    if (c.num_gt > 0) CHECK(*c.ap50 == 0.0);
  }

  std::vector<Detection> dangling{{{0, 0, 1, 1}, 0.5, 9, 1}};
  CHECK_THROWS_AS(evaluate(ds, dangling), IntegrityError);

  EvalConfig bad;
  bad.iou_thresholds = {0.7, 0.5};
  CHECK_THROWS_AS(evaluate(ds, perfect, bad), ParameterError);
}

TEST_CASE("detections beyond the per-image cap are ignored") {
  Dataset ds = one_image({gt(1, 1, {0, 0, 10, 10})});
  std::vector<Detection> dets;
  for (int i = 0; i < 100; ++i) dets.push_back({{50, 50, 60, 60}, 0.9, 1, 1});
  dets.push_back({{0, 0, 10, 10}, 0.1, 1, 1});
  CHECK(evaluate(ds, dets).map50 == 0.0);
  dets.pop_back();
  dets.push_back({{0, 0, 10, 10}, 0.95, 1, 1});
  CHECK(evaluate(ds, dets).map50 == 1.0);
}

TEST_CASE("evaluate against brute force") {
  Rng rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    auto inst = testing::random_eval_instance(rng, 1 + int(uniform_index(rng, 3)), 2);
    EvalReport r = evaluate(inst.dataset, inst.detections);
    oracle::Summary o = oracle::evaluate(inst.dataset, inst.detections);
    CHECK(r.map == o.map);
    CHECK(r.map50 == o.map50);
    CHECK(r.map75 == o.map75);
    for (const ClassResult& c : r.classes) {
      if (c.num_gt == 0) continue;
      CHECK(c.ap == o.per_class[c.class_id]);
    }
  }
}

TEST_CASE("report formats") {
  Dataset ds = one_image({gt(1, 1, {0, 0, 10, 10})}, 2);
  EvalReport r = evaluate(ds, std::vector<Detection>{{{0, 0, 10, 10}, 0.9, 1, 1}});
  std::string json = report_json(r);
  CHECK(json.find("\"All\": 1.0") != std::string::npos);
  CHECK(json.find("\"excluded_class_ids\"") != std::string::npos);
  std::string table = report_table(r);
  CHECK(table.find("All") != std::string::npos);
  CHECK(table.find("class1") != std::string::npos);
  CHECK(table.find("AP50") != std::string::npos);
  CHECK(table.find("mAP75") != std::string::npos);
}

TEST_CASE("handcrafted three-image fixture matches the committed report") {
  const std::filesystem::path dir = std::filesystem::path(MSFK_GOLDEN_DIR) / "eval_fixture";
  Dataset ds = load_coco(dir / "dataset.json").dataset;
  auto dets = load_detections(dir / "detections.json");
  EvalReport r = evaluate(ds, dets);
  CHECK(report_json(r) == testing::slurp(dir / "report.json"));
  CHECK(report_table(r) == testing::slurp(dir / "report.txt"));
  oracle::Summary o = oracle::evaluate(ds, dets);
  CHECK(r.map == o.map);
}
