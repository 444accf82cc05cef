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

#include <benchmark/benchmark.h>

#include "instances.hpp"
#include "msfk/evaluator.hpp"
#include "msfk/fusion_head.hpp"
#include "msfk/geometry.hpp"
#include "msfk/pseudo_label.hpp"

namespace {

using namespace msfk;

void BM_ClassNms(benchmark::State& state) {
  Rng rng(1);
  auto dets = testing::random_detections(rng, std::size_t(state.range(0)), 1, 5);
  for (auto _ : state) benchmark::DoNotOptimize(class_nms(dets, 0.5));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ClassNms)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void BM_Evaluate(benchmark::State& state) {
  Rng rng(2);
  auto inst = testing::random_eval_instance(rng, int(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(eval::evaluate(inst.dataset, inst.detections));
}
BENCHMARK(BM_Evaluate)->RangeMultiplier(4)->Range(4, 256);

void BM_PseudoLabel(benchmark::State& state) {
  Rng rng(3);
  auto inst = testing::random_eval_instance(rng, int(state.range(0)), 5);
  pseudo::PseudoLabelConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(pseudo::run_pseudo_labeling(inst.dataset, inst.detections, cfg));
}
BENCHMARK(BM_PseudoLabel)->RangeMultiplier(4)->Range(4, 256);

struct HeadSetup {
  head::ModalityFeatures rgb, ir;
  head::TextEmbeddings text;
  head::HeadWeights weights;
  head::ImageInfo image{1, 640.0, 512.0};
};

HeadSetup head_setup(std::size_t dim) {
  const std::vector<std::pair<std::size_t, std::size_t>> grid{{20, 25}, {10, 13}};
  head::HeadHyperParams hp;
  hp.dim = dim;
  hp.ffn_hidden = 2 * dim;
  hp.num_queries = 100;
  hp.levels = grid.size();
  Rng rng(4);
  HeadSetup s;
  s.rgb = testing::random_features(rng, head::Modality::kRgb, grid, dim);
  s.ir = testing::random_features(rng, head::Modality::kIr, grid, dim);
  s.text = testing::random_text(rng, {1, 2, 3, 3, 4, 5}, dim);
  s.weights = head::HeadWeights::random(hp, 5);
  return s;
}

void BM_ForwardMsgdino(benchmark::State& state) {
  HeadSetup s = head_setup(std::size_t(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(head::forward_msgdino(s.rgb, s.ir, s.text, s.weights, s.image));
  }
}
BENCHMARK(BM_ForwardMsgdino)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ForwardMsyolow(benchmark::State& state) {
  HeadSetup s = head_setup(std::size_t(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(head::forward_msyolow(s.rgb, s.ir, s.text, s.weights, s.image));
  }
}
BENCHMARK(BM_ForwardMsyolow)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
