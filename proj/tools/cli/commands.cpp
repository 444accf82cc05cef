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

#include "cli/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "msfk/dataset.hpp"
#include "msfk/error.hpp"
#include "msfk/evaluator.hpp"
#include "msfk/fusion_head.hpp"
#include "msfk/gradcheck.hpp"
#include "msfk/pseudo_label.hpp"

namespace msfk::cli {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const std::string& w : warnings) err << "warning: " << w << "\n";
}

struct SampleSplitArgs {
  std::string dataset, out, manifest;
  int k = 5;
  std::uint64_t seed = 0;
};

int sample_split(const SampleSplitArgs& a, std::ostream& out, std::ostream& err) {
  LoadedDataset loaded = load_coco(a.dataset);
  print_warnings(loaded.warnings, err);
  FewShotSplit split = sample_few_shot(loaded.dataset, a.k, a.seed);
  save_coco(filter_to_split(loaded.dataset, split), a.out);
  fs::path manifest = a.manifest.empty() ? fs::path(a.out).replace_extension(".manifest.json") : fs::path(a.manifest);
  save_split_manifest(split, manifest);
  out << "selected " << split.image_ids.size() << " images (k=" << split.k << ", seed=" << split.seed << ")\n";
  for (const auto& c : split.class_counts) {
    out << "  class " << c.class_id << ": " << c.count << (c.flagged ? " (fewer than k available)" : "") << "\n";
  }
  return 0;
}

struct InferArgs {
  std::string rgb, ir, text, weights, head, out;
  ImageId image_id = 1;
  double width = 640.0;
  double height = 512.0;
};

int infer(const InferArgs& a, std::ostream& out) {
  auto rgb = head::load_features(a.rgb, head::Modality::kRgb);
  auto ir = head::load_features(a.ir, head::Modality::kIr);
  auto text = head::load_text(a.text);
  auto weights = head::load_head_weights(a.weights);
  head::ImageInfo image{a.image_id, a.width, a.height};
  std::vector<Detection> dets = a.head == "msgdino" ? head::forward_msgdino(rgb, ir, text, weights, image)
                                                    : head::forward_msyolow(rgb, ir, text, weights, image);
  save_detections(dets, a.out);
  out << a.head << ": wrote " << dets.size() << " detections to " << a.out << "\n";
  return 0;
}

struct PseudoArgs {
  std::string dataset, detections, out, stats, std_mode = "population";
  pseudo::PseudoLabelConfig cfg;
};

pseudo::StdMode parse_std_mode(const std::string& s) {
  return s == "sample" ? pseudo::StdMode::kSample : pseudo::StdMode::kPopulation;
}

int pseudo_label(PseudoArgs a, std::ostream& out, std::ostream& err) {
  a.cfg.std_mode = parse_std_mode(a.std_mode);
  LoadedDataset loaded = load_coco(a.dataset);
  print_warnings(loaded.warnings, err);
  auto dets = load_detections(a.detections);
  auto run = pseudo::run_pseudo_labeling(loaded.dataset, dets, a.cfg);
  save_coco(run.merged, a.out);
  write_file(a.stats, pseudo::stats_csv(run.reports));
  out << "accepted " << run.accepted.size() << " pseudo-labels across " << run.reports.size() << " images\n";
  return 0;
}

struct EvalArgs {
  std::string dataset, detections, out, table;
};

int evaluate(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  LoadedDataset loaded = load_coco(a.dataset);
  print_warnings(loaded.warnings, err);
  auto dets = load_detections(a.detections);
  eval::EvalReport report = eval::evaluate(loaded.dataset, dets);
  write_file(a.out, eval::report_json(report));
  std::string table = eval::report_table(report);
  write_file(a.table.empty() ? fs::path(a.out).replace_extension(".txt") : fs::path(a.table), table);
  out << table;
  return 0;
}

struct GradArgs {
  std::uint64_t seed = 0;
  bool corrupt = false;
};

int gradcheck(const GradArgs& a, std::ostream& out) {
  gradcheck::SuiteOptions opts;
  opts.seed = a.seed;
  opts.corrupt = a.corrupt;
  bool ok = true;
  char line[160];
  for (const auto& r : gradcheck::run_suite(opts)) {
    std::snprintf(line, sizeof line, "%-18s max_rel_err=%.3e  %s\n", r.name.c_str(), r.max_relative_error,
                  r.passed ? "PASS" : "FAIL");
    out << line;
    ok = ok && r.passed;
  }
  return ok ? 0 : static_cast<int>(ExitCode::kNumeric);
}

struct AblateArgs {
  std::string dataset, detections, out;
  std::vector<double> floors{0.2, 0.35, 0.5, 0.75, 1.0};
  double delta = 0.3;
};

int ablate(const AblateArgs& a, std::ostream& out, std::ostream& err) {
  LoadedDataset loaded = load_coco(a.dataset);
  print_warnings(loaded.warnings, err);
  auto dets = load_detections(a.detections);
  std::string csv = "tau_floor,pseudo_population,pseudo_sample\n";
  char line[128];
  for (double floor : a.floors) {
    std::size_t counts[2];
    for (int mode = 0; mode < 2; ++mode) {
      pseudo::PseudoLabelConfig cfg;
      cfg.tau_floor = floor;
      cfg.delta = a.delta;
      cfg.std_mode = mode == 0 ? pseudo::StdMode::kPopulation : pseudo::StdMode::kSample;
      counts[mode] = pseudo::run_pseudo_labeling(loaded.dataset, dets, cfg).accepted.size();
    }
    std::snprintf(line, sizeof line, "%.6f,%zu,%zu\n", floor, counts[0], counts[1]);
    csv += line;
  }
  if (!a.out.empty()) write_file(a.out, csv);
  out << csv;
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multispectral few-shot detection head, pseudo-labeling and evaluation"};
  app.require_subcommand(1);

  SampleSplitArgs split_args;
  auto* split_cmd = app.add_subcommand("sample-split", "Sample a deterministic k-shot support set");
  split_cmd->add_option("--dataset", split_args.dataset, "COCO annotation file")->required();
  split_cmd->add_option("--k", split_args.k, "Instances per class")->required()->check(CLI::PositiveNumber);
  split_cmd->add_option("--seed", split_args.seed, "Shuffle seed");
  split_cmd->add_option("--out", split_args.out, "Filtered COCO file")->required();
  split_cmd->add_option("--manifest", split_args.manifest, "Split manifest (default: <out>.manifest.json)");

  InferArgs infer_args;
  auto* infer_cmd = app.add_subcommand("infer", "Run a detection head on fixture features");
  infer_cmd->add_option("--features-rgb", infer_args.rgb, "RGB feature pyramid (MSWT)")->required();
  infer_cmd->add_option("--features-ir", infer_args.ir, "IR feature pyramid (MSWT)")->required();
  infer_cmd->add_option("--text", infer_args.text, "Prompt embeddings (MSWT)")->required();
  infer_cmd->add_option("--weights", infer_args.weights, "Head weights (MSWT)")->required();
  infer_cmd->add_option("--head", infer_args.head, "msgdino or msyolow")
      ->required()
      ->check(CLI::IsMember({"msgdino", "msyolow"}));
  infer_cmd->add_option("--out", infer_args.out, "COCO results JSON")->required();
  infer_cmd->add_option("--image-id", infer_args.image_id, "Image id stamped on detections");
  infer_cmd->add_option("--image-width", infer_args.width, "Image width in pixels")->check(CLI::PositiveNumber);
  infer_cmd->add_option("--image-height", infer_args.height, "Image height in pixels")->check(CLI::PositiveNumber);

  PseudoArgs pseudo_args;
  auto* pseudo_cmd = app.add_subcommand("pseudo-label", "Generate and merge adaptive pseudo-labels");
  pseudo_cmd->add_option("--dataset", pseudo_args.dataset, "COCO annotation file")->required();
  pseudo_cmd->add_option("--detections", pseudo_args.detections, "COCO results JSON")->required();
  pseudo_cmd->add_option("--tau-floor", pseudo_args.cfg.tau_floor, "Confidence floor")->capture_default_str();
  pseudo_cmd->add_option("--delta", pseudo_args.cfg.delta, "GT IoU gate")->capture_default_str();
  pseudo_cmd->add_option("--nms-iou", pseudo_args.cfg.nms_iou, "Class-wise NMS IoU")->capture_default_str();
  pseudo_cmd->add_option("--top-n", pseudo_args.cfg.top_n_stats, "Scores used for statistics")->capture_default_str();
  pseudo_cmd->add_option("--std-mode", pseudo_args.std_mode, "population or sample")
      ->check(CLI::IsMember({"population", "sample"}))
      ->capture_default_str();
  pseudo_cmd->add_option("--out", pseudo_args.out, "Merged COCO file")->required();
  pseudo_cmd->add_option("--stats", pseudo_args.stats, "Per-image statistics CSV")->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "COCO-style mAP / mAP50 / mAP75");
  eval_cmd->add_option("--dataset", eval_args.dataset, "COCO annotation file")->required();
  eval_cmd->add_option("--detections", eval_args.detections, "COCO results JSON")->required();
  eval_cmd->add_option("--out", eval_args.out, "Report JSON")->required();
  eval_cmd->add_option("--table", eval_args.table, "Text table (default: <out> with .txt)");

  GradArgs grad_args;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of fusion gradients");
  grad_cmd->add_option("--seed", grad_args.seed, "Fixture seed");
  grad_cmd->add_flag("--corrupt", grad_args.corrupt, "Perturb analytic gradients (negative control)");

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "Pseudo-label counts across confidence floors");
  ablate_cmd->add_option("--dataset", ablate_args.dataset, "COCO annotation file")->required();
  ablate_cmd->add_option("--detections", ablate_args.detections, "COCO results JSON")->required();
  ablate_cmd->add_option("--floors", ablate_args.floors, "Floors to sweep")->delimiter(',');
  ablate_cmd->add_option("--delta", ablate_args.delta, "GT IoU gate");
  ablate_cmd->add_option("--out", ablate_args.out, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (*split_cmd) return sample_split(split_args, out, err);
    if (*infer_cmd) return infer(infer_args, out);
    if (*pseudo_cmd) return pseudo_label(pseudo_args, out, err);
    if (*eval_cmd) return evaluate(eval_args, out, err);
    if (*grad_cmd) return gradcheck(grad_args, out);
    if (*ablate_cmd) return ablate(ablate_args, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kIo);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kUsage);
  }
  return static_cast<int>(ExitCode::kUsage);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"msfk"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace msfk::cli
