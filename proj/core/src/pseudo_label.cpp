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

#include "msfk/pseudo_label.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "msfk/error.hpp"
#include "msfk/parallel.hpp"

namespace msfk::pseudo {

void PseudoLabelConfig::validate() const {
  if (!(tau_floor > 0.0 && tau_floor <= 1.0)) throw ParameterError("tau_floor must lie in (0, 1]");
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0, 1)");
  if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw ParameterError("nms_iou must lie in (0, 1]");
  if (top_n_stats < 1) throw ParameterError("top_n_stats must be >= 1");
}

double adaptive_threshold(std::span<const double> scores, const PseudoLabelConfig& cfg) {
  if (scores.empty()) return cfg.tau_floor;
  const double n = static_cast<double>(scores.size());
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= n;
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  double var = 0.0;
  if (cfg.std_mode == StdMode::kPopulation) {
    var = ss / n;
  } else if (scores.size() > 1) {
    var = ss / (n - 1.0);
  }
  return std::max(mean + std::sqrt(var), cfg.tau_floor);
}

double adaptive_threshold(std::span<const Detection> dets, const PseudoLabelConfig& cfg) {
  std::vector<double> scores;
  scores.reserve(dets.size());
  for (const Detection& d : dets) scores.push_back(d.score);
  return adaptive_threshold(scores, cfg);
}

std::vector<Detection> generate_pseudo_labels(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                              const PseudoLabelConfig& cfg) {
  const double tau = adaptive_threshold(dets, cfg);
  std::vector<Detection> confident;
  for (const Detection& d : dets) {
    if (d.score >= tau) confident.push_back(d);
  }
  std::vector<Detection> accepted;
  for (const Detection& d : class_nms(confident, cfg.nms_iou)) {
    if (d.box.degenerate()) continue;
    double worst = 0.0;
    for (const GroundTruth& g : gts) {
      if (g.class_id == d.class_id) worst = std::max(worst, iou(d.box, g.box));
    }
    if (worst < cfg.delta) accepted.push_back(d);
  }
  return accepted;
}

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ScoreStats score_stats(std::span<const Detection> dets, const PseudoLabelConfig& cfg) {
  ScoreStats out;
  if (dets.empty()) return out;
  std::vector<double> scores;
  scores.reserve(dets.size());
  for (const Detection& d : dets) scores.push_back(d.score);
  std::sort(scores.begin(), scores.end(), std::greater<>());
  scores.resize(std::min(scores.size(), static_cast<std::size_t>(cfg.top_n_stats)));
  std::reverse(scores.begin(), scores.end());
  out.median = percentile(scores, 0.5);
  out.p75 = percentile(scores, 0.75);
  out.count = static_cast<int>(scores.size());
  out.empty = false;
  return out;
}

PseudoLabelRun run_pseudo_labeling(const Dataset& ds, std::span<const Detection> dets,
                                   const PseudoLabelConfig& cfg) {
  cfg.validate();
  check_detections(ds, dets);

  std::map<ImageId, std::vector<Detection>> by_image;
  for (const Detection& d : dets) by_image[d.image_id].push_back(d);

  const auto& images = ds.images();
  std::vector<std::vector<Detection>> accepted(images.size());
  std::vector<ImageReport> reports(images.size());
  parallel_for(images.size(), [&](std::size_t i) {
    const ImageId id = images[i].id;
    auto it = by_image.find(id);
    std::span<const Detection> mine;
    if (it != by_image.end()) mine = it->second;
    auto gts = ds.ground_truth(id);
    accepted[i] = generate_pseudo_labels(mine, gts, cfg);
    reports[i] = {id, static_cast<int>(mine.size()), score_stats(mine, cfg), adaptive_threshold(mine, cfg),
                  static_cast<int>(accepted[i].size())};
  });

  PseudoLabelRun run;
  for (auto& a : accepted) run.accepted.insert(run.accepted.end(), a.begin(), a.end());
  run.merged = merge_pseudo_labels(ds, run.accepted);
  run.reports = std::move(reports);
  return run;
}

std::string stats_csv(std::span<const ImageReport> reports) {
  std::string out = "image_id,count,median,p75,tau\n";
  char line[160];
  for (const ImageReport& r : reports) {
    std::snprintf(line, sizeof line, "%lld,%d,%.6f,%.6f,%.6f\n", static_cast<long long>(r.image_id), r.stats.count,
                  r.stats.median, r.stats.p75, r.tau);
    out += line;
  }
  return out;
}

}  // namespace msfk::pseudo
