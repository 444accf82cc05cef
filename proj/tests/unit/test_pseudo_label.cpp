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
#include "msfk/pseudo_label.hpp"
#include "oracles.hpp"

using namespace msfk;
using namespace msfk::pseudo;

TEST_CASE("adaptive threshold") {
  PseudoLabelConfig cfg;
  std::vector<double> low(10, 0.1);
  CHECK(adaptive_threshold(low, cfg) == 0.35);
  std::vector<double> spread{0.2, 0.4, 0.6};
  CHECK(adaptive_threshold(spread, cfg) == doctest::Approx(0.4 + std::sqrt(0.08 / 3.0)).epsilon(1e-12));
  CHECK(adaptive_threshold(spread, cfg) == doctest::Approx(0.5633).epsilon(1e-4));
  CHECK(adaptive_threshold(std::vector<double>{}, cfg) == 0.35);

  PseudoLabelConfig sample = cfg;
  sample.std_mode = StdMode::kSample;
  CHECK(adaptive_threshold(spread, sample) == doctest::Approx(0.6));
  CHECK(adaptive_threshold(std::vector<double>{0.9}, sample) == 0.9);

  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s;
    for (std::size_t i = 0, n = uniform_index(rng, 30); i < n; ++i) s.push_back(uniform_real(rng, 0.0, 1.0));
    double tau = adaptive_threshold(s, cfg);
    CHECK(tau >= cfg.tau_floor);
    CHECK(tau == doctest::Approx(oracle::threshold(s, cfg.tau_floor)).epsilon(1e-12));
  }
}

TEST_CASE("config validation") {
  PseudoLabelConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.tau_floor = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = {};
  cfg.delta = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = {};
  cfg.top_n_stats = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("pseudo-label gate examples") {
  PseudoLabelConfig cfg;
  BBox box{0, 0, 10, 10};
  std::vector<GroundTruth> gt{{box, 1, 1}};
  CHECK(generate_pseudo_labels(std::vector<Detection>{{box, 0.9, 1, 1}}, gt, cfg).empty());
  CHECK(generate_pseudo_labels(std::vector<Detection>{{box, 0.9, 2, 1}}, gt, cfg).size() == 1);

  std::vector<Detection> five;
  for (int i = 0; i < 5; ++i) five.push_back({{20.0 * i, 0, 20.0 * i + 10, 10}, i == 4 ? 0.8 : 0.1, 1, 1});
  CHECK(adaptive_threshold(five, cfg) == doctest::Approx(0.52).epsilon(1e-12));
  auto out = generate_pseudo_labels(five, {}, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 0.8);

  std::vector<Detection> flat{{{3, 3, 3, 9}, 0.9, 1, 1}};
  CHECK(generate_pseudo_labels(flat, {}, cfg).empty());
  CHECK(generate_pseudo_labels({}, gt, cfg).empty());
}

TEST_CASE("pseudo-labels against brute force") {
  PseudoLabelConfig cfg;
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    auto dets = testing::random_detections(rng, uniform_index(rng, 20), 1, 3);
    auto gts = testing::random_ground_truth(rng, uniform_index(rng, 5), 1, 3);
    auto out = generate_pseudo_labels(dets, gts, cfg);
    CHECK(out == oracle::pseudo_labels(dets, gts, cfg.tau_floor, cfg.delta, cfg.nms_iou));
    double tau = adaptive_threshold(dets, cfg);
    for (const Detection& d : out) {
      CHECK(d.score >= tau);
      for (const GroundTruth& g : gts) {
        if (g.class_id == d.class_id) CHECK(iou(d.box, g.box) < cfg.delta);
      }
    }
  }
}

TEST_CASE("score statistics") {
  PseudoLabelConfig cfg;
  auto dets_with = [](std::vector<double> scores) {
    std::vector<Detection> d;
    for (double s : scores) d.push_back({{0, 0, 1, 1}, s, 1, 1});
    return d;
  };
  ScoreStats s = score_stats(dets_with({0.3, 0.1, 0.2}), cfg);
  CHECK(s.median == doctest::Approx(0.2));
  CHECK(s.count == 3);
  CHECK(score_stats(dets_with({0, 0.25, 0.5, 0.75, 1.0}), cfg).p75 == 0.75);

  std::vector<double> sixty;
  for (int i = 0; i < 60; ++i) sixty.push_back(i / 100.0);
  ScoreStats top = score_stats(dets_with(sixty), cfg);
  CHECK(top.count == 50);
  CHECK(top.median == doctest::Approx((0.34 + 0.35) / 2.0));

  ScoreStats none = score_stats({}, cfg);
  CHECK(none.empty);
  CHECK(none.count == 0);
  CHECK(none.median == 0.0);
  CHECK(none.p75 == 0.0);
}

TEST_CASE("run over a dataset") {
  Rng rng(3);
  auto inst = testing::random_eval_instance(rng, 4, 2);
  PseudoLabelConfig cfg;
  PseudoLabelRun run = run_pseudo_labeling(inst.dataset, inst.detections, cfg);
  REQUIRE(run.reports.size() == 4);
  CHECK(run.merged.annotations().size() == inst.dataset.annotations().size() + run.accepted.size());
  std::string csv = stats_csv(run.reports);
  CHECK(csv.rfind("image_id,count,median,p75,tau\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  PseudoLabelConfig ceiling = cfg;
  ceiling.tau_floor = 1.0;
  std::vector<Detection> below;
  for (const Detection& d : inst.detections) {
    if (d.score < 1.0) below.push_back(d);
  }
  CHECK(run_pseudo_labeling(inst.dataset, below, ceiling).merged == inst.dataset);

  std::vector<Detection> dangling{{{0, 0, 1, 1}, 0.5, 1, 77}};
  CHECK_THROWS_AS(run_pseudo_labeling(inst.dataset, dangling, cfg), IntegrityError);
}
