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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "msfk/geometry.hpp"

namespace msfk {

using AnnotationId = std::int64_t;

/// One aligned RGB/IR image pair.
struct ImageRecord {
  ImageId id = 0;
  std::string file_name;
  std::string file_name_ir;
  std::int64_t width = 0;
  std::int64_t height = 0;

  bool operator==(const ImageRecord&) const = default;
};

struct Annotation {
  AnnotationId id = 0;
  ImageId image_id = 0;
  ClassId class_id = 0;
  /// COCO (x, y, w, h).
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  bool is_pseudo = false;

  BBox box() const noexcept { return BBox::from_xywh(x, y, w, h); }
  bool operator==(const Annotation&) const = default;
};

struct Category {
  ClassId id = 0;
  std::string name;

  bool operator==(const Category&) const = default;
};

/// COCO-style container. Referential integrity and id uniqueness are checked
/// on construction (IntegrityError); the value is immutable afterwards.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<ImageRecord> images, std::vector<Annotation> annotations,
          std::vector<Category> categories);

  const std::vector<ImageRecord>& images() const noexcept { return images_; }
  const std::vector<Annotation>& annotations() const noexcept { return annotations_; }
  const std::vector<Category>& categories() const noexcept { return categories_; }

  bool has_image(ImageId id) const { return image_index_.contains(id); }
  bool has_class(ClassId id) const { return class_index_.contains(id); }
  const ImageRecord& image(ImageId id) const;
  const Category& category(ClassId id) const;

  /// Annotations of one image, in dataset order.
  std::vector<GroundTruth> ground_truth(ImageId id) const;

  AnnotationId max_annotation_id() const noexcept;

  bool operator==(const Dataset& other) const {
    return images_ == other.images_ && annotations_ == other.annotations_ && categories_ == other.categories_;
  }

 private:
  std::vector<ImageRecord> images_;
  std::vector<Annotation> annotations_;
  std::vector<Category> categories_;
  std::unordered_map<ImageId, std::size_t> image_index_;
  std::unordered_map<ClassId, std::size_t> class_index_;
  std::unordered_map<ImageId, std::vector<std::size_t>> annotations_by_image_;
};

struct LoadedDataset {
  Dataset dataset;
  /// Non-fatal repairs made while loading (clamped boxes, dropped crowd regions).
  std::vector<std::string> warnings;
};

LoadedDataset parse_coco(std::string_view json_text);
LoadedDataset load_coco(const std::filesystem::path& path);

std::string to_coco_json(const Dataset& ds);
void save_coco(const Dataset& ds, const std::filesystem::path& path);

/// Result of k-shot support-set sampling; k counts instances, not images.
struct FewShotSplit {
  int k = 0;
  std::uint64_t seed = 0;
  /// In selection order.
  std::vector<ImageId> image_ids;
  struct ClassCount {
    ClassId class_id = 0;
    int count = 0;
    /// True when the source dataset cannot supply k instances of this class.
    bool flagged = false;
    bool operator==(const ClassCount&) const = default;
  };
  /// One entry per category, in category order.
  std::vector<ClassCount> class_counts;

  bool operator==(const FewShotSplit&) const = default;
};

/// Greedy support-set selection over a seeded shuffle of the images. An image
/// is taken if it holds at least one instance of a class still below k.
FewShotSplit sample_few_shot(const Dataset& ds, int k, std::uint64_t seed);

/// Keeps only the split's images (in dataset order) and their annotations.
Dataset filter_to_split(const Dataset& ds, const FewShotSplit& split);

std::string split_manifest_json(const FewShotSplit& split);
void save_split_manifest(const FewShotSplit& split, const std::filesystem::path& path);
/// Reads a manifest written by save_split_manifest, or an externally provided
/// split with the same layout.
FewShotSplit load_split_manifest(const std::filesystem::path& path);

/// Appends detections as pseudo annotations with fresh ids (max id + 1, ...),
/// boxes clamped to image bounds. Existing annotations are untouched.
Dataset merge_pseudo_labels(const Dataset& ds, std::span<const Detection> pseudo);

/// COCO results interchange: [{image_id, category_id, bbox: [x,y,w,h], score}].
std::vector<Detection> parse_detections(std::string_view json_text);
std::vector<Detection> load_detections(const std::filesystem::path& path);
std::string detections_json(std::span<const Detection> dets);
void save_detections(std::span<const Detection> dets, const std::filesystem::path& path);

/// Checks every detection's image and class against the dataset.
void check_detections(const Dataset& ds, std::span<const Detection> dets);

}  // namespace msfk
