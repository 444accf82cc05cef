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

#include <span>
#include <string>
#include <vector>

#include "msfk/dataset.hpp"
#include "msfk/geometry.hpp"

namespace msfk::pseudo {

enum class StdMode { kPopulation, kSample };

struct PseudoLabelConfig {
  double tau_floor = 0.35;
  /// A candidate is rejected when it overlaps a same-class GT box at IoU >= delta.
  double delta = 0.3;
  double nms_iou = 0.5;
  int top_n_stats = 50;
  StdMode std_mode = StdMode::kPopulation;

  /// Throws ParameterError when a field leaves its domain.
  void validate() const;
};

/// max(mean + std, tau_floor) over one image's candidate scores; tau_floor for
/// an empty set. Sample std of a single score is taken as 0.
double adaptive_threshold(std::span<const double> scores, const PseudoLabelConfig& cfg);
double adaptive_threshold(std::span<const Detection> dets, const PseudoLabelConfig& cfg);

/// Threshold, class-wise NMS, then the ground-truth IoU gate, for one image.
/// Zero-area boxes never become pseudo-labels.
std::vector<Detection> generate_pseudo_labels(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                              const PseudoLabelConfig& cfg);

struct ScoreStats {
  double median = 0.0;
  double p75 = 0.0;
  int count = 0;
  bool empty = true;
};

/// Linear-interpolation percentile of ascending-sorted values, q in [0, 1].
double percentile(std::span<const double> sorted, double q);

/// Median and 75th percentile of the top_n_stats highest scores.
ScoreStats score_stats(std::span<const Detection> dets, const PseudoLabelConfig& cfg);

struct ImageReport {
  ImageId image_id = 0;
  int candidates = 0;
  ScoreStats stats;
  double tau = 0.0;
  int accepted = 0;
};

struct PseudoLabelRun {
  Dataset merged;
  /// Accepted pseudo-labels, images in dataset order.
  std::vector<Detection> accepted;
  /// One entry per dataset image, in dataset order.
  std::vector<ImageReport> reports;
};

/// Runs the per-image pipeline over every image in the dataset (in parallel)
/// and merges the accepted labels. Ground truth per image is every existing
/// annotation of that image.
PseudoLabelRun run_pseudo_labeling(const Dataset& ds, std::span<const Detection> dets,
                                   const PseudoLabelConfig& cfg);

/// CSV with header "image_id,count,median,p75,tau"; reals fixed to 6 decimals.
std::string stats_csv(std::span<const ImageReport> reports);

}  // namespace msfk::pseudo
