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

#include "msfk/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "json_util.hpp"
#include "msfk/error.hpp"
#include "msfk/parallel.hpp"

namespace msfk::eval {

std::vector<double> EvalConfig::coco_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50.0 + 5.0 * i) / 100.0);
  return t;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) throw ParameterError("at least one IoU threshold is required");
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    double t = iou_thresholds[i];
    if (!(t > 0.0 && t <= 1.0)) throw ParameterError("IoU thresholds must lie in (0, 1]");
    if (i > 0 && !(t > iou_thresholds[i - 1])) throw ParameterError("IoU thresholds must be strictly increasing");
  }
  if (recall_points < 2) throw ParameterError("recall_points must be >= 2");
  if (max_dets_per_image < 1) throw ParameterError("max_dets_per_image must be >= 1");
}

namespace {

std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

}  // namespace

std::vector<bool> match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                   double iou_thresh) {
  std::vector<bool> tp(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t di : score_order(dets)) {
    std::size_t best = gts.size();
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      double v = iou(dets[di].box, gts[g].box);
      if (v >= iou_thresh && (best == gts.size() || v > best_iou)) {
        best = g;
        best_iou = v;
      }
    }
    if (best != gts.size()) {
      taken[best] = true;
      tp[di] = true;
    }
  }
  return tp;
}

std::optional<double> average_precision(std::span<const ScoredLabel> ordered, int num_gt, int recall_points) {
  if (num_gt == 0) {
    if (ordered.empty()) return std::nullopt;
    return 0.0;
  }
  const std::size_t n = ordered.size();
  std::vector<long long> tp(n);
  std::vector<double> envelope(n);
  long long tps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tps += ordered[i].true_positive ? 1 : 0;
    tp[i] = tps;
    envelope[i] = double(tps) / double(i + 1);
  }
  for (std::size_t i = n; i-- > 1;) envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);

  // recall_i >= r_j  <=>  tp_i * (R-1) >= j * num_gt, kept in integers.
  const long long steps = recall_points - 1;
  double sum = 0.0;
  std::size_t cursor = 0;
  for (long long j = 0; j < recall_points; ++j) {
    while (cursor < n && tp[cursor] * steps < j * num_gt) ++cursor;
    if (cursor == n) break;
    sum += envelope[cursor];
  }
  return sum / double(recall_points);
}

std::vector<ScoredLabel> class_labels(const Dataset& ds, std::span<const Detection> dets, ClassId cls,
                                      double iou_thresh, int max_dets_per_image) {
  std::map<ImageId, std::vector<Detection>> by_image;
  for (const Detection& d : dets) {
    if (d.class_id == cls) by_image[d.image_id].push_back(d);
  }
  std::vector<ScoredLabel> labels;
  for (const ImageRecord& img : ds.images()) {
    auto it = by_image.find(img.id);
    if (it == by_image.end()) continue;
    std::vector<Detection> mine;
    for (std::size_t idx : score_order(it->second)) mine.push_back(it->second[idx]);
    if (mine.size() > static_cast<std::size_t>(max_dets_per_image)) mine.resize(max_dets_per_image);
    std::vector<GroundTruth> gts;
    for (const GroundTruth& g : ds.ground_truth(img.id)) {
      if (g.class_id == cls) gts.push_back(g);
    }
    auto tp = match_detections(mine, gts, iou_thresh);
    for (std::size_t i = 0; i < mine.size(); ++i) labels.push_back({mine[i].score, tp[i]});
  }
  std::stable_sort(labels.begin(), labels.end(),
                   [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });
  return labels;
}

EvalReport evaluate(const Dataset& ds, std::span<const Detection> dets, const EvalConfig& cfg) {
  cfg.validate();
  check_detections(ds, dets);

  std::map<ClassId, int> gt_count;
  for (const Annotation& a : ds.annotations()) ++gt_count[a.class_id];

  EvalReport report;
  report.iou_thresholds = cfg.iou_thresholds;
  const auto& cats = ds.categories();
  report.classes.resize(cats.size());

  parallel_for(cats.size(), [&](std::size_t c) {
    ClassResult& r = report.classes[c];
    r.class_id = cats[c].id;
    r.name = cats[c].name;
    r.num_gt = gt_count[r.class_id];
    if (r.num_gt == 0) {
      r.ap.assign(cfg.iou_thresholds.size(), std::nullopt);
      return;
    }
    auto ap_at = [&](double t) {
      auto labels = class_labels(ds, dets, r.class_id, t, cfg.max_dets_per_image);
      return average_precision(labels, r.num_gt, cfg.recall_points);
    };
    for (double t : cfg.iou_thresholds) r.ap.push_back(ap_at(t));
    r.ap50 = ap_at(0.5);
    r.ap75 = ap_at(0.75);
  });

  std::vector<const ClassResult*> included;
  for (const ClassResult& r : report.classes) {
    if (r.num_gt == 0) {
      report.excluded.push_back(r.class_id);
    } else {
      included.push_back(&r);
    }
  }
  if (included.empty()) return report;

  const double nc = double(included.size());
  double over_thresholds = 0.0;
  for (std::size_t t = 0; t < cfg.iou_thresholds.size(); ++t) {
    double s = 0.0;
    for (const ClassResult* r : included) s += *r->ap[t];
    over_thresholds += s / nc;
  }
  report.map = over_thresholds / double(cfg.iou_thresholds.size());
  double s50 = 0.0, s75 = 0.0;
  for (const ClassResult* r : included) {
    s50 += *r->ap50;
    s75 += *r->ap75;
  }
  report.map50 = s50 / nc;
  report.map75 = s75 / nc;
  return report;
}

std::string report_json(const EvalReport& report) {
  using detail::Json;
  using detail::round6;
  auto opt = [](const std::optional<double>& v) { return v ? Json(round6(*v)) : Json(nullptr); };
  Json classes = Json::array();
  for (const ClassResult& r : report.classes) {
    Json ap = Json::array();
    for (const auto& v : r.ap) ap.push_back(opt(v));
    classes.push_back({{"class_id", r.class_id},
                       {"name", r.name},
                       {"num_gt", r.num_gt},
                       {"ap", ap},
                       {"ap50", opt(r.ap50)},
                       {"ap75", opt(r.ap75)}});
  }
  Json thresholds = Json::array();
  for (double t : report.iou_thresholds) thresholds.push_back(round6(t));
  Json root = {{"iou_thresholds", thresholds},
               {"classes", classes},
               {"excluded_class_ids", report.excluded},
               {"mAP", round6(report.map)},
               {"mAP50", round6(report.map50)},
               {"mAP75", round6(report.map75)},
               {"All", round6(report.map50)}};
  return root.dump(1) + "\n";
}

std::string report_table(const EvalReport& report) {
  std::string out;
  char cell[64];
  std::snprintf(cell, sizeof cell, "%-8s", "");
  out += cell;
  for (const ClassResult& r : report.classes) {
    std::snprintf(cell, sizeof cell, "%14.14s", r.name.empty() ? std::to_string(r.class_id).c_str() : r.name.c_str());
    out += cell;
  }
  std::snprintf(cell, sizeof cell, "%14s\n", "All");
  out += cell;
  std::snprintf(cell, sizeof cell, "%-8s", "AP50");
  out += cell;
  for (const ClassResult& r : report.classes) {
    if (r.ap50) {
      std::snprintf(cell, sizeof cell, "%14.6f", *r.ap50);
    } else {
      std::snprintf(cell, sizeof cell, "%14s", "-");
    }
    out += cell;
  }
  std::snprintf(cell, sizeof cell, "%14.6f\n", report.map50);
  out += cell;
  std::snprintf(cell, sizeof cell, "\nmAP     %.6f\nmAP50   %.6f\nmAP75   %.6f\n", report.map, report.map50, report.map75);
  out += cell;
  return out;
}

}  // namespace msfk::eval
