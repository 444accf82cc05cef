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

#include "msfk/dataset.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <utility>

#include "json_util.hpp"
#include "msfk/error.hpp"
#include "msfk/random.hpp"

namespace msfk {

using detail::field;
using detail::Json;
using detail::round6;

Dataset::Dataset(std::vector<ImageRecord> images, std::vector<Annotation> annotations,
                 std::vector<Category> categories)
    : images_(std::move(images)), annotations_(std::move(annotations)), categories_(std::move(categories)) {
  for (std::size_t i = 0; i < images_.size(); ++i) {
    if (!image_index_.emplace(images_[i].id, i).second) {
      throw IntegrityError("duplicate image id " + std::to_string(images_[i].id));
    }
  }
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (!class_index_.emplace(categories_[i].id, i).second) {
      throw IntegrityError("duplicate category id " + std::to_string(categories_[i].id));
    }
  }
  std::set<AnnotationId> seen;
  for (std::size_t i = 0; i < annotations_.size(); ++i) {
    const Annotation& a = annotations_[i];
    const std::string who = "annotation " + std::to_string(a.id);
    if (!seen.insert(a.id).second) throw IntegrityError("duplicate annotation id " + std::to_string(a.id));
    if (!has_image(a.image_id)) {
      throw IntegrityError(who + " references missing image_id " + std::to_string(a.image_id));
    }
    if (!has_class(a.class_id)) {
      throw IntegrityError(who + " references missing category_id " + std::to_string(a.class_id));
    }
    if (!(a.w >= 0.0 && a.h >= 0.0)) throw IntegrityError(who + " has negative width or height");
    annotations_by_image_[a.image_id].push_back(i);
  }
}

const ImageRecord& Dataset::image(ImageId id) const {
  auto it = image_index_.find(id);
  if (it == image_index_.end()) throw IntegrityError("unknown image_id " + std::to_string(id));
  return images_[it->second];
}

const Category& Dataset::category(ClassId id) const {
  auto it = class_index_.find(id);
  if (it == class_index_.end()) throw IntegrityError("unknown category_id " + std::to_string(id));
  return categories_[it->second];
}

std::vector<GroundTruth> Dataset::ground_truth(ImageId id) const {
  std::vector<GroundTruth> out;
  auto it = annotations_by_image_.find(id);
  if (it == annotations_by_image_.end()) return out;
  out.reserve(it->second.size());
  for (std::size_t idx : it->second) {
    const Annotation& a = annotations_[idx];
    out.push_back({a.box(), a.class_id, a.image_id});
  }
  return out;
}

AnnotationId Dataset::max_annotation_id() const noexcept {
  AnnotationId best = 0;
  for (const Annotation& a : annotations_) best = std::max(best, a.id);
  return best;
}

namespace {

const Json& array_field(const Json& root, const char* key) {
  auto it = root.find(key);
  if (it == root.end() || !it->is_array()) {
    throw FormatError(std::string("COCO file needs an array field '") + key + "'");
  }
  return *it;
}

std::string box_text(double x1, double y1, double x2, double y2) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "(%.6f, %.6f, %.6f, %.6f)", x1, y1, x2, y2);
  return buf;
}

}  // namespace

LoadedDataset parse_coco(std::string_view json_text) {
  Json root = detail::parse_json(json_text);
  if (!root.is_object()) throw FormatError("COCO file must be a JSON object");
  LoadedDataset result;

  std::vector<ImageRecord> images;
  for (const Json& j : array_field(root, "images")) {
    ImageRecord img;
    img.id = field<ImageId>(j, "id", "image");
    const std::string where = "image " + std::to_string(img.id);
    img.file_name = j.value("file_name", std::string{});
    img.file_name_ir = j.value("file_name_ir", std::string{});
    img.width = field<std::int64_t>(j, "width", where);
    img.height = field<std::int64_t>(j, "height", where);
    if (img.width <= 0 || img.height <= 0) throw FormatError(where + ": width and height must be positive");
    images.push_back(std::move(img));
  }

  std::vector<Category> categories;
  for (const Json& j : array_field(root, "categories")) {
    Category c;
    c.id = field<ClassId>(j, "id", "category");
    c.name = j.value("name", std::string{});
    categories.push_back(std::move(c));
  }

  std::map<ImageId, const ImageRecord*> by_id;
  for (const ImageRecord& img : images) by_id.emplace(img.id, &img);

  std::vector<Annotation> annotations;
  for (const Json& j : array_field(root, "annotations")) {
    Annotation a;
    a.id = field<AnnotationId>(j, "id", "annotation");
    const std::string where = "annotation " + std::to_string(a.id);
    a.image_id = field<ImageId>(j, "image_id", where);
    a.class_id = field<ClassId>(j, "category_id", where);
    auto bbox = field<std::vector<double>>(j, "bbox", where);
    if (bbox.size() != 4) throw FormatError(where + ": bbox must have 4 numbers");
    a.is_pseudo = j.value("is_pseudo", false);
    if (j.value("iscrowd", 0) != 0) {
      result.warnings.push_back(where + ": crowd region dropped");
      continue;
    }
    auto img = by_id.find(a.image_id);
    if (img == by_id.end()) {
      throw IntegrityError(where + " references missing image_id " + std::to_string(a.image_id));
    }
    if (bbox[2] < 0.0 || bbox[3] < 0.0) throw IntegrityError(where + " has negative width or height");
    const double W = static_cast<double>(img->second->width);
    const double H = static_cast<double>(img->second->height);
    double x1 = std::clamp(bbox[0], 0.0, W);
    double y1 = std::clamp(bbox[1], 0.0, H);
    double x2 = std::clamp(bbox[0] + bbox[2], 0.0, W);
    double y2 = std::clamp(bbox[1] + bbox[3], 0.0, H);
    if (x1 != bbox[0] || y1 != bbox[1] || x2 != bbox[0] + bbox[2] || y2 != bbox[1] + bbox[3]) {
      result.warnings.push_back(where + ": box " + box_text(bbox[0], bbox[1], bbox[0] + bbox[2], bbox[1] + bbox[3]) +
                                " clamped to " + box_text(x1, y1, x2, y2));
      a.x = x1;
      a.y = y1;
      a.w = x2 - x1;
      a.h = y2 - y1;
    } else {
      a.x = bbox[0];
      a.y = bbox[1];
      a.w = bbox[2];
      a.h = bbox[3];
    }
    annotations.push_back(a);
  }

  result.dataset = Dataset(std::move(images), std::move(annotations), std::move(categories));
  return result;
}

LoadedDataset load_coco(const std::filesystem::path& path) { return parse_coco(detail::read_text_file(path)); }

std::string to_coco_json(const Dataset& ds) {
  Json images = Json::array();
  for (const ImageRecord& img : ds.images()) {
    images.push_back({{"id", img.id},
                      {"file_name", img.file_name},
                      {"file_name_ir", img.file_name_ir},
                      {"width", img.width},
                      {"height", img.height}});
  }
  Json annotations = Json::array();
  for (const Annotation& a : ds.annotations()) {
    annotations.push_back({{"id", a.id},
                           {"image_id", a.image_id},
                           {"category_id", a.class_id},
                           {"bbox", {round6(a.x), round6(a.y), round6(a.w), round6(a.h)}},
                           {"area", round6(a.w * a.h)},
                           {"iscrowd", 0},
                           {"is_pseudo", a.is_pseudo}});
  }
  Json categories = Json::array();
  for (const Category& c : ds.categories()) categories.push_back({{"id", c.id}, {"name", c.name}});
  Json root = {{"images", std::move(images)}, {"annotations", std::move(annotations)},
               {"categories", std::move(categories)}};
  return root.dump(1) + "\n";
}

void save_coco(const Dataset& ds, const std::filesystem::path& path) {
  detail::write_text_file(path, to_coco_json(ds));
}

FewShotSplit sample_few_shot(const Dataset& ds, int k, std::uint64_t seed) {
  if (k < 1) throw ParameterError("k must be >= 1, got " + std::to_string(k));

  std::map<ClassId, int> available;
  for (const Annotation& a : ds.annotations()) ++available[a.class_id];

  std::vector<ImageId> order;
  order.reserve(ds.images().size());
  for (const ImageRecord& img : ds.images()) order.push_back(img.id);
  Rng rng(seed);
  shuffle(std::span<ImageId>(order), rng);

  std::map<ClassId, int> counts;
  for (const Category& c : ds.categories()) counts[c.id] = 0;
  auto below_k = [&](ClassId c) { return counts[c] < k; };
  auto all_satisfied = [&] {
    return std::none_of(ds.categories().begin(), ds.categories().end(), [&](const Category& c) {
      return below_k(c.id) && available[c.id] > counts[c.id];
    });
  };

  FewShotSplit split;
  split.k = k;
  split.seed = seed;
  for (ImageId id : order) {
    if (all_satisfied()) break;
    auto gts = ds.ground_truth(id);
    bool useful = std::any_of(gts.begin(), gts.end(), [&](const GroundTruth& g) { return below_k(g.class_id); });
    if (!useful) continue;
    split.image_ids.push_back(id);
    for (const GroundTruth& g : gts) ++counts[g.class_id];
  }

  for (const Category& c : ds.categories()) {
    split.class_counts.push_back({c.id, counts[c.id], available[c.id] < k});
  }
  return split;
}

Dataset filter_to_split(const Dataset& ds, const FewShotSplit& split) {
  std::set<ImageId> keep(split.image_ids.begin(), split.image_ids.end());
  for (ImageId id : keep) {
    if (!ds.has_image(id)) throw IntegrityError("split references missing image_id " + std::to_string(id));
  }
  std::vector<ImageRecord> images;
  for (const ImageRecord& img : ds.images()) {
    if (keep.contains(img.id)) images.push_back(img);
  }
  std::vector<Annotation> annotations;
  for (const Annotation& a : ds.annotations()) {
    if (keep.contains(a.image_id)) annotations.push_back(a);
  }
  return Dataset(std::move(images), std::move(annotations), ds.categories());
}

std::string split_manifest_json(const FewShotSplit& split) {
  Json counts = Json::array();
  for (const auto& c : split.class_counts) {
    counts.push_back({{"class_id", c.class_id}, {"count", c.count}, {"flagged", c.flagged}});
  }
  Json root = {{"k", split.k}, {"seed", split.seed}, {"image_ids", split.image_ids}, {"class_counts", counts}};
  return root.dump(1) + "\n";
}

void save_split_manifest(const FewShotSplit& split, const std::filesystem::path& path) {
  detail::write_text_file(path, split_manifest_json(split));
}

FewShotSplit load_split_manifest(const std::filesystem::path& path) {
  Json root = detail::parse_json(detail::read_text_file(path));
  FewShotSplit split;
  split.k = field<int>(root, "k", "split manifest");
  split.seed = root.value("seed", std::uint64_t{0});
  split.image_ids = field<std::vector<ImageId>>(root, "image_ids", "split manifest");
  if (auto it = root.find("class_counts"); it != root.end()) {
    for (const Json& c : *it) {
      split.class_counts.push_back({field<ClassId>(c, "class_id", "class_counts"),
                                    field<int>(c, "count", "class_counts"), c.value("flagged", false)});
    }
  }
  return split;
}

Dataset merge_pseudo_labels(const Dataset& ds, std::span<const Detection> pseudo) {
  check_detections(ds, pseudo);
  std::vector<Annotation> annotations = ds.annotations();
  AnnotationId next = ds.max_annotation_id() + 1;
  for (const Detection& d : pseudo) {
    const ImageRecord& img = ds.image(d.image_id);
    const double W = static_cast<double>(img.width);
    const double H = static_cast<double>(img.height);
    double x1 = std::clamp(d.box.x1, 0.0, W);
    double y1 = std::clamp(d.box.y1, 0.0, H);
    double x2 = std::clamp(d.box.x2, x1, W);
    double y2 = std::clamp(d.box.y2, y1, H);
    annotations.push_back({next++, d.image_id, d.class_id, x1, y1, x2 - x1, y2 - y1, true});
  }
  return Dataset(ds.images(), std::move(annotations), ds.categories());
}

std::vector<Detection> parse_detections(std::string_view json_text) {
  Json root = detail::parse_json(json_text);
  if (!root.is_array()) throw FormatError("detections file must be a JSON array");
  std::vector<Detection> dets;
  dets.reserve(root.size());
  for (std::size_t i = 0; i < root.size(); ++i) {
    const Json& j = root[i];
    const std::string where = "detection " + std::to_string(i);
    Detection d;
    d.image_id = field<ImageId>(j, "image_id", where);
    d.class_id = field<ClassId>(j, "category_id", where);
    d.score = field<double>(j, "score", where);
    auto bbox = field<std::vector<double>>(j, "bbox", where);
    if (bbox.size() != 4) throw FormatError(where + ": bbox must have 4 numbers");
    if (bbox[2] < 0.0 || bbox[3] < 0.0) throw FormatError(where + ": negative bbox width or height");
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw FormatError(where + ": score outside [0, 1]");
    d.box = BBox::from_xywh(bbox[0], bbox[1], bbox[2], bbox[3]);
    dets.push_back(d);
  }
  return dets;
}

std::vector<Detection> load_detections(const std::filesystem::path& path) {
  return parse_detections(detail::read_text_file(path));
}

std::string detections_json(std::span<const Detection> dets) {
  Json root = Json::array();
  for (const Detection& d : dets) {
    root.push_back({{"image_id", d.image_id},
                    {"category_id", d.class_id},
                    {"bbox", {round6(d.box.x1), round6(d.box.y1), round6(d.box.width()), round6(d.box.height())}},
                    {"score", round6(d.score)}});
  }
  return root.dump(1) + "\n";
}

void save_detections(std::span<const Detection> dets, const std::filesystem::path& path) {
  detail::write_text_file(path, detections_json(dets));
}

void check_detections(const Dataset& ds, std::span<const Detection> dets) {
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (!ds.has_image(dets[i].image_id)) {
      throw IntegrityError("detection " + std::to_string(i) + " references missing image_id " +
                           std::to_string(dets[i].image_id));
    }
    if (!ds.has_class(dets[i].class_id)) {
      throw IntegrityError("detection " + std::to_string(i) + " references missing category_id " +
                           std::to_string(dets[i].class_id));
    }
  }
}

}  // namespace msfk
