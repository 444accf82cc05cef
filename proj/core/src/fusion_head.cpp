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

#include "msfk/fusion_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "msfk/error.hpp"
#include "msfk/kernels.hpp"
#include "msfk/random.hpp"

namespace msfk::head {

namespace k = msfk::kernels;

const char* modality_name(Modality m) noexcept {
  switch (m) {
    case Modality::kRgb:
      return "rgb";
    case Modality::kIr:
      return "ir";
    case Modality::kFused:
      return "fused";
  }
  return "?";
}

std::size_t ModalityFeatures::dim() const {
  if (levels.empty()) throw DimensionError("feature pyramid has no levels");
  return levels.front().tokens.cols();
}

std::size_t ModalityFeatures::total_positions() const {
  std::size_t n = 0;
  for (const FeatureLevel& l : levels) n += l.tokens.rows();
  return n;
}

Tensor ModalityFeatures::flattened() const {
  std::vector<Tensor> parts;
  parts.reserve(levels.size());
  for (const FeatureLevel& l : levels) parts.push_back(l.tokens);
  return k::concat_rows(parts);
}

std::vector<ClassId> TextEmbeddings::classes() const {
  std::set<ClassId> unique(token_class.begin(), token_class.end());
  return {unique.begin(), unique.end()};
}

namespace {

void check_width(const Tensor& m, std::size_t d, const char* what) {
  if (m.cols() != d) {
    throw DimensionError(std::string(what) + ": width " + std::to_string(m.cols()) + " does not match " +
                         std::to_string(d));
  }
}

void check_pyramid(const ModalityFeatures& f) {
  if (f.levels.empty()) throw DimensionError("feature pyramid has no levels");
  const std::size_t d = f.dim();
  for (const FeatureLevel& l : f.levels) {
    check_width(l.tokens, d, "feature level");
    if (l.height * l.width != l.tokens.rows()) {
      throw DimensionError("feature level grid " + std::to_string(l.height) + "x" + std::to_string(l.width) +
                           " does not match " + std::to_string(l.tokens.rows()) + " rows");
    }
  }
}

void check_text(const TextEmbeddings& t) {
  if (t.token_class.size() != t.count()) {
    throw DimensionError("token-to-class map has " + std::to_string(t.token_class.size()) + " entries for " +
                         std::to_string(t.count()) + " tokens");
  }
}

void check_same_levels(const ModalityFeatures& a, const ModalityFeatures& b) {
  if (a.levels.size() != b.levels.size()) throw DimensionError("modalities have different level counts");
  for (std::size_t i = 0; i < a.levels.size(); ++i) {
    if (a.levels[i].tokens.shape() != b.levels[i].tokens.shape() || a.levels[i].height != b.levels[i].height ||
        a.levels[i].width != b.levels[i].width) {
      throw DimensionError("level " + std::to_string(i) + " shapes differ between modalities: " +
                           shape_to_string(a.levels[i].tokens.shape()) + " vs " +
                           shape_to_string(b.levels[i].tokens.shape()));
    }
  }
}

Tensor residual(const Tensor& x, const Tensor& delta, const HeadOptions& opts) {
  Tensor sum = k::add(x, delta);
  return opts.layer_norm ? k::layer_norm(sum, opts.norm_eps) : sum;
}

}  // namespace

Tensor attend(const Tensor& queries, const Tensor& context, const AttentionWeights& w) {
  Tensor q = k::matmul(queries, w.query);
  Tensor key = k::matmul(context, w.key);
  Tensor v = k::matmul(context, w.value);
  return k::matmul(k::scaled_dot_attention(q, key, v), w.output);
}

Tensor feed_forward(const Tensor& x, const FeedForwardWeights& w) {
  return k::linear(k::relu(k::linear(x, w.w1, w.b1)), w.w2, w.b2);
}

std::pair<ModalityFeatures, TextEmbeddings> encode_modality(const ModalityFeatures& f, const TextEmbeddings& t,
                                                            const EnhancerWeights& w, const HeadOptions& opts) {
  check_pyramid(f);
  check_text(t);
  const std::size_t d = f.dim();
  check_width(t.tokens, d, "text embeddings");
  check_width(w.visual_self.query, d, "enhancer weights");

  ModalityFeatures out = f;
  for (FeatureLevel& level : out.levels) {
    level.tokens = residual(level.tokens, attend(level.tokens, level.tokens, w.visual_self), opts);
  }

  // Both cross-attention directions read the same inputs.
  Tensor visual = out.flattened();
  TextEmbeddings text_out = t;
  text_out.tokens = residual(t.tokens, attend(t.tokens, visual, w.text_from_image), opts);
  text_out.token_modality.assign(t.count(), f.modality);

  for (FeatureLevel& level : out.levels) {
    level.tokens = residual(level.tokens, attend(level.tokens, t.tokens, w.image_from_text), opts);
    level.tokens = residual(level.tokens, feed_forward(level.tokens, w.ffn), opts);
  }
  return {std::move(out), std::move(text_out)};
}

ModalityFeatures fuse_visual(const ModalityFeatures& a, const ModalityFeatures& b) {
  check_pyramid(a);
  check_pyramid(b);
  check_same_levels(a, b);
  ModalityFeatures out;
  out.modality = Modality::kFused;
  for (std::size_t i = 0; i < a.levels.size(); ++i) {
    out.levels.push_back({k::add(a.levels[i].tokens, b.levels[i].tokens), a.levels[i].height, a.levels[i].width});
  }
  return out;
}

TextEmbeddings fuse_text(const TextEmbeddings& a, const TextEmbeddings& b) {
  check_text(a);
  check_text(b);
  if (a.tokens.cols() != b.tokens.cols()) {
    throw DimensionError("fuse_text: width " + std::to_string(a.tokens.cols()) + " vs " +
                         std::to_string(b.tokens.cols()));
  }
  TextEmbeddings out;
  out.tokens = k::concat_rows(a.tokens, b.tokens);
  out.token_class = a.token_class;
  out.token_class.insert(out.token_class.end(), b.token_class.begin(), b.token_class.end());
  auto tags = [](const TextEmbeddings& t, Modality fallback) {
    return t.token_modality.empty() ? std::vector<Modality>(t.count(), fallback) : t.token_modality;
  };
  out.token_modality = tags(a, Modality::kRgb);
  auto tb = tags(b, Modality::kIr);
  out.token_modality.insert(out.token_modality.end(), tb.begin(), tb.end());
  return out;
}

Tensor affinity(const Tensor& level_tokens, const TextEmbeddings& t) {
  check_width(t.tokens, level_tokens.cols(), "affinity");
  return k::matmul_transposed(level_tokens, t.tokens);
}

Tensor affinity(const ModalityFeatures& f, const TextEmbeddings& t) {
  check_pyramid(f);
  return affinity(f.flattened(), t);
}

QuerySet select_queries(const Tensor& s_rgb, const Tensor& s_ir, const ModalityFeatures& f_rgb,
                        const ModalityFeatures& f_ir, std::size_t n_q) {
  check_pyramid(f_rgb);
  check_pyramid(f_ir);
  if (s_rgb.rows() != f_rgb.total_positions() || s_ir.rows() != f_ir.total_positions()) {
    throw DimensionError("affinity rows do not match feature positions");
  }
  if (s_rgb.cols() != s_ir.cols()) throw DimensionError("affinity text widths differ between modalities");
  const std::size_t total = s_rgb.rows() + s_ir.rows();
  if (n_q == 0 || n_q > total) {
    throw ParameterError("n_q must lie in [1, " + std::to_string(total) + "], got " + std::to_string(n_q));
  }

  std::vector<float> scores = k::row_max(s_rgb);
  std::vector<float> ir_scores = k::row_max(s_ir);
  scores.insert(scores.end(), ir_scores.begin(), ir_scores.end());

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_q), order.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  order.resize(n_q);

  QuerySet out;
  Tensor all_rows = k::concat_rows(f_rgb.flattened(), f_ir.flattened());
  out.queries = k::gather_rows(all_rows, order);
  out.provenance.reserve(n_q);
  for (std::size_t idx : order) {
    QueryProvenance p;
    p.score = scores[idx];
    const ModalityFeatures* src = &f_rgb;
    std::size_t local = idx;
    p.modality = Modality::kRgb;
    if (idx >= s_rgb.rows()) {
      src = &f_ir;
      local = idx - s_rgb.rows();
      p.modality = Modality::kIr;
    }
    for (std::size_t l = 0; l < src->levels.size(); ++l) {
      std::size_t n = src->levels[l].tokens.rows();
      if (local < n) {
        p.level = l;
        p.spatial_index = local;
        break;
      }
      local -= n;
    }
    out.provenance.push_back(p);
  }
  return out;
}

Tensor decoder_layer(const Tensor& queries, const ModalityFeatures& f_fused, const TextEmbeddings& t_fused,
                     const DecoderLayerWeights& w, const HeadOptions& opts) {
  const std::size_t d = queries.cols();
  check_width(f_fused.flattened(), d, "decoder visual memory");
  check_width(t_fused.tokens, d, "decoder text memory");
  check_width(w.self_attn.query, d, "decoder weights");
  Tensor visual = f_fused.flattened();
  Tensor q = residual(queries, attend(queries, queries, w.self_attn), opts);
  q = residual(q, attend(q, visual, w.visual_cross), opts);
  q = residual(q, attend(q, t_fused.tokens, w.text_cross), opts);
  return residual(q, feed_forward(q, w.ffn), opts);
}

Tensor decode(const Tensor& queries, const ModalityFeatures& f_fused, const TextEmbeddings& t_fused,
              const std::vector<DecoderLayerWeights>& layers, const HeadOptions& opts) {
  Tensor q = queries;
  for (const DecoderLayerWeights& layer : layers) q = decoder_layer(q, f_fused, t_fused, layer, opts);
  return q;
}

Tensor box_head(const Tensor& q_out, const BoxMlpWeights& w) {
  check_width(q_out, w.w1.rows(), "box head");
  Tensor h = k::relu(k::linear(q_out, w.w1, w.b1));
  h = k::relu(k::linear(h, w.w2, w.b2));
  return k::sigmoid(k::linear(h, w.w3, w.b3));
}

BBox decode_box(float cx, float cy, float w, float h, const ImageInfo& image) {
  const double half_w = double(w) / 2.0;
  const double half_h = double(h) / 2.0;
  BBox b;
  b.x1 = std::clamp((double(cx) - half_w) * image.width, 0.0, image.width);
  b.y1 = std::clamp((double(cy) - half_h) * image.height, 0.0, image.height);
  b.x2 = std::clamp((double(cx) + half_w) * image.width, 0.0, image.width);
  b.y2 = std::clamp((double(cy) + half_h) * image.height, 0.0, image.height);
  return b;
}

Tensor class_logits_query(const Tensor& q_out, const TextEmbeddings& t_rgb, const TextEmbeddings& t_ir) {
  if (t_rgb.tokens.shape() != t_ir.tokens.shape()) {
    throw DimensionError("per-modality text embeddings differ in shape: " + shape_to_string(t_rgb.tokens.shape()) +
                         " vs " + shape_to_string(t_ir.tokens.shape()));
  }
  check_width(t_rgb.tokens, q_out.cols(), "class logits");
  return k::elementwise_max(k::matmul_transposed(q_out, t_rgb.tokens), k::matmul_transposed(q_out, t_ir.tokens))
      .values;
}

ClassScores pool_class_logits(const Tensor& token_logits, const std::vector<ClassId>& token_class) {
  if (token_class.size() != token_logits.cols()) {
    throw DimensionError("token-to-class map has " + std::to_string(token_class.size()) + " entries for " +
                         std::to_string(token_logits.cols()) + " logit columns");
  }
  std::set<ClassId> unique(token_class.begin(), token_class.end());
  ClassScores out;
  out.classes.assign(unique.begin(), unique.end());
  const std::size_t rows = token_logits.rows();
  const std::size_t nc = out.classes.size();
  std::vector<float> pooled(rows * nc, 0.0F);
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t r = 0; r < rows; ++r) {
      bool first = true;
      float best = 0.0F;
      for (std::size_t t = 0; t < token_class.size(); ++t) {
        if (token_class[t] != out.classes[c]) continue;
        float v = token_logits.at(r, t);
        if (first || v > best) best = v;
        first = false;
      }
      pooled[r * nc + c] = best;
    }
  }
  out.logits = Tensor({rows, nc}, std::move(pooled));
  return out;
}

std::vector<ConvHeadLevel> conv_head(const ModalityFeatures& f_fused, const TextEmbeddings& t_rgb,
                                     const TextEmbeddings& t_ir, const ConvBoxWeights& w) {
  check_pyramid(f_fused);
  std::vector<ConvHeadLevel> out;
  out.reserve(f_fused.levels.size());
  for (const FeatureLevel& level : f_fused.levels) {
    Tensor boxes = k::sigmoid(k::linear(level.tokens, w.weight, w.bias));
    Tensor logits = class_logits_query(level.tokens, t_rgb, t_ir);
    out.push_back({boxes.reshaped({level.height, level.width, 4}),
                   logits.reshaped({level.height, level.width, logits.cols()})});
  }
  return out;
}

namespace {

void check_inputs(const ModalityFeatures& rgb, const ModalityFeatures& ir, const TextEmbeddings& t,
                  const HeadWeights& w) {
  check_pyramid(rgb);
  check_pyramid(ir);
  check_same_levels(rgb, ir);
  check_text(t);
  if (rgb.dim() != w.hp.dim) {
    throw DimensionError("feature width " + std::to_string(rgb.dim()) + " does not match weights d=" +
                         std::to_string(w.hp.dim));
  }
  if (rgb.levels.size() != w.hp.levels) {
    throw DimensionError("feature pyramid has " + std::to_string(rgb.levels.size()) + " levels, weights expect " +
                         std::to_string(w.hp.levels));
  }
}

/// Turns per-row normalised boxes and token logits into detections.
void emit(const Tensor& boxes, const Tensor& token_logits, const std::vector<ClassId>& token_class,
          const ImageInfo& image, std::vector<Detection>& out) {
  ClassScores pooled = pool_class_logits(token_logits, token_class);
  const std::size_t nc = pooled.classes.size();
  for (std::size_t r = 0; r < boxes.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < nc; ++c) {
      if (pooled.logits.at(r, c) > pooled.logits.at(r, best)) best = c;
    }
    Detection det;
    det.box = decode_box(boxes.at(r, 0), boxes.at(r, 1), boxes.at(r, 2), boxes.at(r, 3), image);
    det.score = kernels::logistic(double(pooled.logits.at(r, best)));
    det.class_id = pooled.classes[best];
    det.image_id = image.id;
    out.push_back(det);
  }
}

}  // namespace

std::vector<Detection> forward_msgdino(const ModalityFeatures& rgb, const ModalityFeatures& ir,
                                       const TextEmbeddings& t, const HeadWeights& w, const ImageInfo& image,
                                       const HeadOptions& opts) {
  check_inputs(rgb, ir, t, w);
  auto [f_rgb, t_rgb] = encode_modality(rgb, t, w.rgb_enhancer, opts);
  auto [f_ir, t_ir] = encode_modality(ir, t, w.ir_enhancer, opts);

  QuerySet qs = select_queries(affinity(f_rgb, t_rgb), affinity(f_ir, t_ir), f_rgb, f_ir, w.hp.num_queries);
  ModalityFeatures f_fused = fuse_visual(f_rgb, f_ir);
  TextEmbeddings t_fused = fuse_text(t_rgb, t_ir);
  Tensor q_out = decode(qs.queries, f_fused, t_fused, w.decoder, opts);

  std::vector<Detection> out;
  out.reserve(q_out.rows());
  emit(box_head(q_out, w.box), class_logits_query(q_out, t_rgb, t_ir), t.token_class, image, out);
  return out;
}

std::vector<Detection> forward_msyolow(const ModalityFeatures& rgb, const ModalityFeatures& ir,
                                       const TextEmbeddings& t, const HeadWeights& w, const ImageInfo& image,
                                       const HeadOptions& opts) {
  check_inputs(rgb, ir, t, w);
  auto [f_rgb, t_rgb] = encode_modality(rgb, t, w.rgb_enhancer, opts);
  auto [f_ir, t_ir] = encode_modality(ir, t, w.ir_enhancer, opts);
  ModalityFeatures f_fused = fuse_visual(f_rgb, f_ir);

  std::vector<Detection> out;
  out.reserve(f_fused.total_positions());
  for (const ConvHeadLevel& level : conv_head(f_fused, t_rgb, t_ir, w.conv_box)) {
    const std::size_t n = level.boxes.shape()[0] * level.boxes.shape()[1];
    emit(level.boxes.reshaped({n, 4}), level.logits.reshaped({n, level.logits.shape()[2]}), t.token_class, image,
         out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weights

namespace {

const char* const kAttnParts[] = {"q", "k", "v", "o"};

struct ShapeReader {
  const io::WeightStore& store;

  Tensor take(const std::string& name, const Shape& shape) const {
    auto t = store.find(name);
    if (!t) throw FormatError("weights: missing tensor '" + name + "'");
    if (t->shape() != shape) {
      throw FormatError("weights: tensor '" + name + "' has shape " + shape_to_string(t->shape()) + ", expected " +
                        shape_to_string(shape));
    }
    return *t;
  }

  // Members are assigned one at a time: some compilers leak the already
  // built elements of a braced aggregate when a later element throws.
  AttentionWeights attention(const std::string& prefix, std::size_t d) const {
    AttentionWeights a;
    a.query = take(prefix + ".q", {d, d});
    a.key = take(prefix + ".k", {d, d});
    a.value = take(prefix + ".v", {d, d});
    a.output = take(prefix + ".o", {d, d});
    return a;
  }

  FeedForwardWeights ffn(const std::string& prefix, std::size_t d, std::size_t h) const {
    FeedForwardWeights f;
    f.w1 = take(prefix + ".w1", {d, h});
    f.b1 = take(prefix + ".b1", {h});
    f.w2 = take(prefix + ".w2", {h, d});
    f.b2 = take(prefix + ".b2", {d});
    return f;
  }
};

std::size_t hyper_value(float v, const char* name) {
  if (!(v >= 1.0F) || v != std::floor(v)) {
    throw FormatError(std::string("weights: hyperparameter ") + name + " must be a positive integer");
  }
  return static_cast<std::size_t>(v);
}

/// Calls fn(name, shape) for every tensor of the layout in file order.
template <typename Fn>
void for_each_slot(const HeadHyperParams& hp, Fn fn) {
  const std::size_t d = hp.dim, h = hp.ffn_hidden;
  auto attention = [&](const std::string& prefix) {
    for (const char* p : kAttnParts) fn(prefix + "." + p, Shape{d, d});
  };
  auto ffn = [&](const std::string& prefix) {
    fn(prefix + ".w1", Shape{d, h});
    fn(prefix + ".b1", Shape{h});
    fn(prefix + ".w2", Shape{h, d});
    fn(prefix + ".b2", Shape{d});
  };
  for (const char* m : {"rgb", "ir"}) {
    const std::string base = std::string("enc.") + m;
    attention(base + ".visual_self");
    attention(base + ".text_from_image");
    attention(base + ".image_from_text");
    ffn(base + ".ffn");
  }
  for (std::size_t j = 0; j < hp.decoder_layers; ++j) {
    const std::string base = "dec." + std::to_string(j);
    attention(base + ".self_attn");
    attention(base + ".visual_cross");
    attention(base + ".text_cross");
    ffn(base + ".ffn");
  }
  fn("box.w1", Shape{d, d});
  fn("box.b1", Shape{d});
  fn("box.w2", Shape{d, d});
  fn("box.b2", Shape{d});
  fn("box.w3", Shape{d, 4});
  fn("box.b3", Shape{4});
  fn("conv_box.weight", Shape{d, 4});
  fn("conv_box.bias", Shape{4});
}

HeadWeights assemble(const HeadHyperParams& hp, const io::WeightStore& store) {
  ShapeReader r{store};
  const std::size_t d = hp.dim, h = hp.ffn_hidden;
  HeadWeights w;
  w.hp = hp;
  auto enhancer = [&](const std::string& m) {
    const std::string base = "enc." + m;
    EnhancerWeights e;
    e.visual_self = r.attention(base + ".visual_self", d);
    e.text_from_image = r.attention(base + ".text_from_image", d);
    e.image_from_text = r.attention(base + ".image_from_text", d);
    e.ffn = r.ffn(base + ".ffn", d, h);
    return e;
  };
  w.rgb_enhancer = enhancer("rgb");
  w.ir_enhancer = enhancer("ir");
  for (std::size_t j = 0; j < hp.decoder_layers; ++j) {
    const std::string base = "dec." + std::to_string(j);
    DecoderLayerWeights layer;
    layer.self_attn = r.attention(base + ".self_attn", d);
    layer.visual_cross = r.attention(base + ".visual_cross", d);
    layer.text_cross = r.attention(base + ".text_cross", d);
    layer.ffn = r.ffn(base + ".ffn", d, h);
    w.decoder.push_back(std::move(layer));
  }
  w.box.w1 = r.take("box.w1", {d, d});
  w.box.b1 = r.take("box.b1", {d});
  w.box.w2 = r.take("box.w2", {d, d});
  w.box.b2 = r.take("box.b2", {d});
  w.box.w3 = r.take("box.w3", {d, 4});
  w.box.b3 = r.take("box.b3", {4});
  w.conv_box.weight = r.take("conv_box.weight", {d, 4});
  w.conv_box.bias = r.take("conv_box.bias", {4});
  return w;
}

Tensor hparams_tensor(const HeadHyperParams& hp) {
  return Tensor({4}, {float(hp.dim), float(hp.decoder_layers), float(hp.num_queries), float(hp.levels)});
}

}  // namespace

HeadWeights HeadWeights::from_store(const io::WeightStore& store) {
  auto hparams = store.find("hparams");
  if (!hparams) throw FormatError("weights: missing tensor 'hparams'");
  if (hparams->shape() != Shape{4}) throw FormatError("weights: tensor 'hparams' must have shape [4]");
  HeadHyperParams hp;
  hp.dim = hyper_value((*hparams)[0], "d");
  hp.decoder_layers = hyper_value((*hparams)[1], "J");
  hp.num_queries = hyper_value((*hparams)[2], "N_q");
  hp.levels = hyper_value((*hparams)[3], "L");
  auto w1 = store.find("enc.rgb.ffn.w1");
  if (!w1) throw FormatError("weights: missing tensor 'enc.rgb.ffn.w1'");
  if (w1->rank() != 2) throw FormatError("weights: tensor 'enc.rgb.ffn.w1' must be a matrix");
  hp.ffn_hidden = w1->shape()[1];
  return assemble(hp, store);
}

io::WeightStore HeadWeights::to_store() const {
  io::WeightStore store;
  store.insert("hparams", hparams_tensor(hp));
  auto attention = [&](const std::string& prefix, const AttentionWeights& a) {
    store.insert(prefix + ".q", a.query);
    store.insert(prefix + ".k", a.key);
    store.insert(prefix + ".v", a.value);
    store.insert(prefix + ".o", a.output);
  };
  auto ffn = [&](const std::string& prefix, const FeedForwardWeights& f) {
    store.insert(prefix + ".w1", f.w1);
    store.insert(prefix + ".b1", f.b1);
    store.insert(prefix + ".w2", f.w2);
    store.insert(prefix + ".b2", f.b2);
  };
  for (Modality m : {Modality::kRgb, Modality::kIr}) {
    const std::string base = std::string("enc.") + modality_name(m);
    const EnhancerWeights& e = enhancer(m);
    attention(base + ".visual_self", e.visual_self);
    attention(base + ".text_from_image", e.text_from_image);
    attention(base + ".image_from_text", e.image_from_text);
    ffn(base + ".ffn", e.ffn);
  }
  for (std::size_t j = 0; j < decoder.size(); ++j) {
    const std::string base = "dec." + std::to_string(j);
    attention(base + ".self_attn", decoder[j].self_attn);
    attention(base + ".visual_cross", decoder[j].visual_cross);
    attention(base + ".text_cross", decoder[j].text_cross);
    ffn(base + ".ffn", decoder[j].ffn);
  }
  store.insert("box.w1", box.w1);
  store.insert("box.b1", box.b1);
  store.insert("box.w2", box.w2);
  store.insert("box.b2", box.b2);
  store.insert("box.w3", box.w3);
  store.insert("box.b3", box.b3);
  store.insert("conv_box.weight", conv_box.weight);
  store.insert("conv_box.bias", conv_box.bias);
  return store;
}

HeadWeights HeadWeights::random(const HeadHyperParams& hp, std::uint64_t seed, double scale) {
  Rng rng(seed);
  const double bound = scale / std::sqrt(double(hp.dim));
  io::WeightStore store;
  for_each_slot(hp, [&](const std::string& name, const Shape& shape) {
    if (shape.size() == 1) {
      store.insert(name, Tensor::zeros(shape));
      return;
    }
    std::vector<float> data(shape[0] * shape[1]);
    for (float& v : data) v = static_cast<float>(uniform_real(rng, -bound, bound));
    store.insert(name, Tensor(shape, std::move(data)));
  });
  return assemble(hp, store);
}

HeadWeights HeadWeights::zeros(const HeadHyperParams& hp) {
  io::WeightStore store;
  for_each_slot(hp, [&](const std::string& name, const Shape& shape) { store.insert(name, Tensor::zeros(shape)); });
  return assemble(hp, store);
}

// ---------------------------------------------------------------------------
// Fixture files

ModalityFeatures load_features(const std::filesystem::path& path, Modality modality) {
  io::WeightStore store = io::load_weights(path);
  ModalityFeatures f;
  f.modality = modality;
  for (std::size_t l = 0;; ++l) {
    auto t = store.find("level" + std::to_string(l));
    if (!t) break;
    if (t->rank() != 3) {
      throw FormatError("features '" + path.string() + "': level" + std::to_string(l) + " must be [H, W, d], got " +
                        shape_to_string(t->shape()));
    }
    const std::size_t h = t->shape()[0], w = t->shape()[1], d = t->shape()[2];
    f.levels.push_back({t->reshaped({h * w, d}), h, w});
  }
  if (f.levels.empty()) throw FormatError("features '" + path.string() + "': missing tensor 'level0'");
  if (f.levels.size() != store.size()) {
    throw FormatError("features '" + path.string() + "': unexpected entries besides level0..level" +
                      std::to_string(f.levels.size() - 1));
  }
  try {
    check_pyramid(f);
  } catch (const DimensionError& e) {
    throw FormatError("features '" + path.string() + "': " + e.what());
  }
  return f;
}

void save_features(const ModalityFeatures& f, const std::filesystem::path& path) {
  io::WeightStore store;
  for (std::size_t l = 0; l < f.levels.size(); ++l) {
    const FeatureLevel& level = f.levels[l];
    store.insert("level" + std::to_string(l), level.tokens.reshaped({level.height, level.width, level.tokens.cols()}));
  }
  io::save_weights(path, store);
}

TextEmbeddings load_text(const std::filesystem::path& path) {
  io::WeightStore store = io::load_weights(path);
  auto tokens = store.find("tokens");
  auto classes = store.find("token_class");
  if (!tokens) throw FormatError("text '" + path.string() + "': missing tensor 'tokens'");
  if (!classes) throw FormatError("text '" + path.string() + "': missing tensor 'token_class'");
  if (tokens->rank() != 2) throw FormatError("text '" + path.string() + "': 'tokens' must be [N_t, d]");
  if (classes->rank() != 1 || classes->size() != tokens->rows()) {
    throw FormatError("text '" + path.string() + "': 'token_class' must be [N_t]");
  }
  TextEmbeddings t{*tokens, {}, {}};
  for (float v : classes->data()) {
    if (v != std::floor(v)) throw FormatError("text '" + path.string() + "': 'token_class' holds a non-integer");
    t.token_class.push_back(static_cast<ClassId>(v));
  }
  return t;
}

void save_text(const TextEmbeddings& t, const std::filesystem::path& path) {
  io::WeightStore store;
  store.insert("tokens", t.tokens);
  std::vector<float> classes;
  for (ClassId c : t.token_class) classes.push_back(static_cast<float>(c));
  const std::size_t n = classes.size();
  store.insert("token_class", Tensor({n}, std::move(classes)));
  io::save_weights(path, store);
}

HeadWeights load_head_weights(const std::filesystem::path& path) {
  return HeadWeights::from_store(io::load_weights(path));
}

}  // namespace msfk::head
