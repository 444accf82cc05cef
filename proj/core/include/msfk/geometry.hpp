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

#include <cstdint>
#include <span>
#include <vector>

namespace msfk {

using ImageId = std::int64_t;
using ClassId = std::int64_t;

/// Axis-aligned box in absolute pixel corner form.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  /// From COCO's (x, y, w, h).
  static BBox from_xywh(double x, double y, double w, double h) { return {x, y, x + w, y + h}; }

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
  bool valid() const noexcept { return x1 <= x2 && y1 <= y2; }
  bool degenerate() const noexcept { return area() <= 0.0; }

  bool operator==(const BBox&) const = default;
};

struct Detection {
  BBox box;
  double score = 0.0;
  ClassId class_id = 0;
  ImageId image_id = 0;

  bool operator==(const Detection&) const = default;
};

struct GroundTruth {
  BBox box;
  ClassId class_id = 0;
  ImageId image_id = 0;

  bool operator==(const GroundTruth&) const = default;
};

/// Intersection over union; 0 when the union has zero area.
double iou(const BBox& a, const BBox& b) noexcept;

/// Greedy per-class NMS over one image's detections. A box is suppressed
/// when its IoU with an already kept box of the same class is >= iou_thresh.
/// Output is sorted by score, descending; equal scores keep input order.
std::vector<Detection> class_nms(std::span<const Detection> dets, double iou_thresh);

}  // namespace msfk
