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
#include <sstream>

#include "cli/commands.hpp"
#include "doctest.h"
#include "instances.hpp"
#include "msfk/dataset.hpp"
#include "temp_dir.hpp"

using namespace msfk;
namespace fs = std::filesystem;

namespace {

const fs::path kGolden = MSFK_GOLDEN_DIR;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Three classes, 30 images with one to three instances each.
void write_toy_dataset(const fs::path& path) {
  Rng rng(12);
  std::vector<ImageRecord> imgs;
  std::vector<Annotation> anns;
  for (int i = 1; i <= 30; ++i) {
    imgs.push_back({i, "rgb", "ir", 64, 64});
    for (std::size_t j = 0, n = 1 + uniform_index(rng, 3); j < n; ++j) {
      Annotation a;
      a.id = AnnotationId(anns.size() + 1);
      a.image_id = i;
      a.class_id = 1 + ClassId(j % 3 == 0 ? uniform_index(rng, 3) : j % 3);
      a.x = 4.0 * double(j);
      a.y = 2.0;
      a.w = 10.0;
      a.h = 12.0;
      anns.push_back(a);
    }
  }
  save_coco(Dataset(imgs, anns, testing::numbered_categories(3)), path);
}

std::vector<std::string> infer_args(const std::string& head, const fs::path& out) {
  const fs::path fx = kGolden / "fixture";
  return {"infer",   "--features-rgb", (fx / "features_rgb.mswt").string(),
          "--features-ir", (fx / "features_ir.mswt").string(), "--text", (fx / "text.mswt").string(),
          "--weights", (fx / "weights.mswt").string(), "--head", head, "--out", out.string()};
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(invoke({}).code == 1);
  CHECK(invoke({"frobnicate"}).code == 1);
  CHECK(invoke({"eval", "--dataset", "x.json"}).code == 1);
  testing::TempDir dir;
  Result r = invoke(infer_args("msdetr", dir / "o.json"));
  CHECK(r.code == 1);
  CHECK_FALSE(fs::exists(dir / "o.json"));
  CHECK(invoke({"sample-split", "--dataset", "x.json", "--k", "0", "--out", "y.json"}).code == 1);
}

TEST_CASE("sample-split") {
  testing::TempDir dir;
  write_toy_dataset(dir / "toy.json");
  auto args = [&](const std::string& tag, int k) {
    return std::vector<std::string>{"sample-split", "--dataset", (dir / "toy.json").string(), "--k", std::to_string(k),
                                    "--seed", "3", "--out", (dir / (tag + ".json")).string()};
  };
  REQUIRE(invoke(args("a", 5)).code == 0);
  REQUIRE(invoke(args("b", 5)).code == 0);
  CHECK(testing::slurp(dir / "a.manifest.json") == testing::slurp(dir / "b.manifest.json"));
  CHECK(testing::slurp(dir / "a.json") == testing::slurp(dir / "b.json"));
  FewShotSplit split = load_split_manifest(dir / "a.manifest.json");
  for (const auto& c : split.class_counts) CHECK(c.count >= 5);
  Dataset sub = load_coco(dir / "a.json").dataset;
  CHECK(sub.images().size() == split.image_ids.size());

  Result missing = invoke({"sample-split", "--dataset", (dir / "absent.json").string(), "--k", "5", "--out",
                        (dir / "c.json").string()});
  CHECK(missing.code == 2);
  testing::spit(dir / "broken.json", "{\"images\": [");
  CHECK(invoke({"sample-split", "--dataset", (dir / "broken.json").string(), "--k", "5", "--out",
             (dir / "c.json").string()})
            .code == 2);
}

TEST_CASE("infer writes one record per query") {
  testing::TempDir dir;
  REQUIRE(invoke(infer_args("msgdino", dir / "g.json")).code == 0);
  CHECK(load_detections(dir / "g.json").size() == 6);
  REQUIRE(invoke(infer_args("msyolow", dir / "y.json")).code == 0);
  CHECK(load_detections(dir / "y.json").size() == 26);
}

TEST_CASE("infer rejects malformed fixtures") {
  testing::TempDir dir;
  std::string weights = testing::slurp(kGolden / "fixture" / "weights.mswt");
  testing::spit(dir / "w.mswt", weights.substr(0, weights.size() / 2));
  auto args = infer_args("msgdino", dir / "o.json");
  args[8] = (dir / "w.mswt").string();
  Result r = invoke(args);
  CHECK(r.code == 2);
  CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("pipeline reproduces the golden files byte for byte") {
  for (const std::string head : {"msgdino", "msyolow"}) {
    CAPTURE(head);
    testing::TempDir dir;
    const fs::path expected = kGolden / "expected" / head;
    const std::string dataset = (kGolden / "fixture" / "dataset.json").string();
    REQUIRE(invoke(infer_args(head, dir / "detections.json")).code == 0);
    REQUIRE(invoke({"pseudo-label", "--dataset", dataset, "--detections", (dir / "detections.json").string(), "--out",
                 (dir / "merged.json").string(), "--stats", (dir / "stats.csv").string()})
                .code == 0);
    Result ev = invoke({"eval", "--dataset", dataset, "--detections", (dir / "detections.json").string(), "--out",
                     (dir / "report.json").string()});
    REQUIRE(ev.code == 0);
    for (const char* name : {"detections.json", "merged.json", "stats.csv", "report.json"}) {
      CAPTURE(name);
      CHECK(testing::slurp(dir / name) == testing::slurp(expected / name));
    }
    CHECK(testing::slurp(dir / "report.txt") == testing::slurp(expected / "report.txt"));
    CHECK(ev.out == testing::slurp(expected / "report.txt"));
  }
}

TEST_CASE("pseudo-label with a floor of one adds nothing") {
  testing::TempDir dir;
  const std::string dataset = (kGolden / "fixture" / "dataset.json").string();
  REQUIRE(invoke(infer_args("msyolow", dir / "d.json")).code == 0);
  REQUIRE(invoke({"pseudo-label", "--dataset", dataset, "--detections", (dir / "d.json").string(), "--tau-floor", "1.0",
               "--out", (dir / "m.json").string(), "--stats", (dir / "s.csv").string()})
              .code == 0);
  CHECK(load_coco(dir / "m.json").dataset == load_coco(dataset).dataset);
  CHECK(invoke({"pseudo-label", "--dataset", dataset, "--detections", (dir / "d.json").string(), "--tau-floor", "0",
             "--out", (dir / "m.json").string(), "--stats", (dir / "s.csv").string()})
            .code == 1);

  testing::spit(dir / "dangling.json", R"([{"image_id": 5, "category_id": 1, "bbox": [0, 0, 1, 1], "score": 0.5}])");
  CHECK(invoke({"pseudo-label", "--dataset", dataset, "--detections", (dir / "dangling.json").string(), "--out",
             (dir / "m.json").string(), "--stats", (dir / "s.csv").string()})
            .code == 3);
}

TEST_CASE("gradcheck") {
  Result ok = invoke({"gradcheck", "--seed", "0"});
  CHECK(ok.code == 0);
  for (const char* name : {"sum_fusion", "concat_fusion", "max_fusion", "affinity", "class_logits_max"}) {
    CHECK(ok.out.find(name) != std::string::npos);
  }
  CHECK(ok.out.find("max_rel_err=") != std::string::npos);
  Result bad = invoke({"gradcheck", "--seed", "0", "--corrupt"});
  CHECK(bad.code != 0);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}

TEST_CASE("ablate sweeps floors") {
  testing::TempDir dir;
  const std::string dataset = (kGolden / "fixture" / "dataset.json").string();
  REQUIRE(invoke(infer_args("msgdino", dir / "d.json")).code == 0);
  Result r = invoke({"ablate", "--dataset", dataset, "--detections", (dir / "d.json").string(), "--out",
                  (dir / "a.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out == testing::slurp(dir / "a.csv"));
  CHECK(r.out.rfind("tau_floor,pseudo_population,pseudo_sample\n0.200000,", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 6);
}
