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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msfk/dataset.hpp"
#include "msfk/geometry.hpp"

/// COCO-style box evaluation: greedy score-ordered matching, 101-point
/// interpolated AP, averaged over classes and IoU thresholds.
namespace msfk::eval {

struct EvalConfig {
  /// 0.50:0.05:0.95 by default.
  std::vector<double> iou_thresholds = coco_thresholds();
  int recall_points = 101;
  int max_dets_per_image = 100;

  static std::vector<double> coco_thresholds();
  void validate() const;
};

/// TP flag per detection, in input order. Detections are visited by
/// descending score (stable); each takes the unmatched GT with the highest
/// IoU if that IoU >= iou_thresh (ties to the lower GT index).
std::vector<bool> match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                   double iou_thresh);

struct ScoredLabel {
  double score = 0.0;
  bool true_positive = false;
};

/// Interpolated AP over labels already sorted by descending score.
/// nullopt when there is neither ground truth nor a detection.
std::optional<double> average_precision(std::span<const ScoredLabel> ordered, int num_gt, int recall_points);

struct ClassResult {
  ClassId class_id = 0;
  std::string name;
  int num_gt = 0;
  /// One entry per configured threshold; nullopt for excluded classes.
  std::vector<std::optional<double>> ap;
  std::optional<double> ap50;
  std::optional<double> ap75;
};

struct EvalReport {
  std::vector<double> iou_thresholds;
  std::vector<ClassResult> classes;
  /// Classes without ground truth; left out of every mean.
  std::vector<ClassId> excluded;
  double map = 0.0;
  double map50 = 0.0;
  double map75 = 0.0;
};

/// Labels for one class across the whole dataset, sorted for AP. Exposed for
/// tests and tooling; evaluate() is built on it.
std::vector<ScoredLabel> class_labels(const Dataset& ds, std::span<const Detection> dets, ClassId cls,
                                      double iou_thresh, int max_dets_per_image);

/// Throws IntegrityError for detections with unknown image or class ids.
EvalReport evaluate(const Dataset& ds, std::span<const Detection> dets, const EvalConfig& cfg = {});

std::string report_json(const EvalReport& report);
/// Fixed-width table: per-class AP50 columns plus "All", then mAP lines.
std::string report_table(const EvalReport& report);

}  // namespace msfk::eval
