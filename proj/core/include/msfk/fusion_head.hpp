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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "msfk/geometry.hpp"
#include "msfk/tensor.hpp"
#include "msfk/tensor_io.hpp"

/// Multispectral vision-language detection head.
///
/// Both variants share the same front half: each modality runs through its own
/// enhancer block against the prompt embeddings, visual maps are fused by sum
/// and text embeddings by concatenation (RGB rows first, then IR). Class
/// logits are per-modality text similarities merged by elementwise max.
///
/// The query variant (msgdino) selects the N_q most text-relevant positions
/// from either modality and refines them with a J-layer decoder; the
/// convolutional variant (msyolow) predicts at every grid position.
namespace msfk::head {

enum class Modality : std::uint8_t { kRgb = 0, kIr = 1, kFused = 2 };

const char* modality_name(Modality m) noexcept;

/// One pyramid level, flattened row-major to (height·width) × d.
struct FeatureLevel {
  Tensor tokens;
  std::size_t height = 0;
  std::size_t width = 0;
};

struct ModalityFeatures {
  Modality modality = Modality::kRgb;
  std::vector<FeatureLevel> levels;

  std::size_t dim() const;
  std::size_t total_positions() const;
  /// All levels stacked in level order.
  Tensor flattened() const;
};

struct TextEmbeddings {
  Tensor tokens;  // N_t × d
  /// Category of each token row.
  std::vector<ClassId> token_class;
  /// Source modality per token; empty for raw prompt embeddings.
  std::vector<Modality> token_modality;

  std::size_t count() const { return tokens.rows(); }
  /// Distinct classes, ascending.
  std::vector<ClassId> classes() const;
};

struct QueryProvenance {
  Modality modality = Modality::kRgb;
  std::size_t level = 0;
  /// Row-major index within the level grid.
  std::size_t spatial_index = 0;
  float score = 0.0F;

  bool operator==(const QueryProvenance&) const = default;
};

struct QuerySet {
  Tensor queries;  // N_q × d
  std::vector<QueryProvenance> provenance;
};

// ---------------------------------------------------------------------------
// Weights

struct AttentionWeights {
  Tensor query, key, value, output;  // each d × d
};

struct FeedForwardWeights {
  Tensor w1, b1, w2, b2;  // d × h, h, h × d, d
};

struct EnhancerWeights {
  AttentionWeights visual_self;
  AttentionWeights text_from_image;  // text queries, visual keys
  AttentionWeights image_from_text;  // visual queries, text keys
  FeedForwardWeights ffn;
};

struct DecoderLayerWeights {
  AttentionWeights self_attn;
  AttentionWeights visual_cross;
  AttentionWeights text_cross;
  FeedForwardWeights ffn;
};

struct BoxMlpWeights {
  Tensor w1, b1, w2, b2, w3, b3;  // d→d→d→4
};

struct ConvBoxWeights {
  Tensor weight, bias;  // d × 4, 4
};

struct HeadHyperParams {
  std::size_t dim = 8;
  std::size_t decoder_layers = 2;
  std::size_t num_queries = 6;
  std::size_t levels = 2;
  std::size_t ffn_hidden = 8;

  bool operator==(const HeadHyperParams&) const = default;
};

struct HeadWeights {
  HeadHyperParams hp;
  EnhancerWeights rgb_enhancer;
  EnhancerWeights ir_enhancer;
  std::vector<DecoderLayerWeights> decoder;
  BoxMlpWeights box;
  ConvBoxWeights conv_box;

  /// Validates presence and shape of every tensor; FormatError names the
  /// offending entry.
  static HeadWeights from_store(const io::WeightStore& store);
  io::WeightStore to_store() const;

  /// Uniform(-scale/√d, scale/√d) weights, zero biases.
  static HeadWeights random(const HeadHyperParams& hp, std::uint64_t seed, double scale = 1.0);
  /// All tensors zero: every sub-block contributes nothing.
  static HeadWeights zeros(const HeadHyperParams& hp);

  const EnhancerWeights& enhancer(Modality m) const { return m == Modality::kIr ? ir_enhancer : rgb_enhancer; }
};

struct HeadOptions {
  /// Post-residual layer norm in every enhancer and decoder sub-block.
  /// Disabling it exposes the pure residual path.
  bool layer_norm = true;
  double norm_eps = 1e-5;
};

struct ImageInfo {
  ImageId id = 0;
  double width = 0.0;
  double height = 0.0;
};

// ---------------------------------------------------------------------------
// Building blocks

/// Single-head attention with output projection.
Tensor attend(const Tensor& queries, const Tensor& context, const AttentionWeights& w);
Tensor feed_forward(const Tensor& x, const FeedForwardWeights& w);

std::pair<ModalityFeatures, TextEmbeddings> encode_modality(const ModalityFeatures& f, const TextEmbeddings& t,
                                                            const EnhancerWeights& w,
                                                            const HeadOptions& opts = {});

ModalityFeatures fuse_visual(const ModalityFeatures& a, const ModalityFeatures& b);
TextEmbeddings fuse_text(const TextEmbeddings& a, const TextEmbeddings& b);

/// Unscaled dot product of visual tokens against text tokens.
Tensor affinity(const Tensor& level_tokens, const TextEmbeddings& t);
/// Affinity of every level, rows stacked in level order.
Tensor affinity(const ModalityFeatures& f, const TextEmbeddings& t);

/// Rows of s_rgb then s_ir are scored by their max over text; the n_q best
/// (ties to the lower concatenated index) become queries.
QuerySet select_queries(const Tensor& s_rgb, const Tensor& s_ir, const ModalityFeatures& f_rgb,
                        const ModalityFeatures& f_ir, std::size_t n_q);

Tensor decoder_layer(const Tensor& queries, const ModalityFeatures& f_fused, const TextEmbeddings& t_fused,
                     const DecoderLayerWeights& w, const HeadOptions& opts = {});
Tensor decode(const Tensor& queries, const ModalityFeatures& f_fused, const TextEmbeddings& t_fused,
              const std::vector<DecoderLayerWeights>& layers, const HeadOptions& opts = {});

/// Normalised (cx, cy, w, h) per query.
Tensor box_head(const Tensor& q_out, const BoxMlpWeights& w);

/// Corner-form pixels, clamped to the image.
BBox decode_box(float cx, float cy, float w, float h, const ImageInfo& image);

/// max(q·T'_rgbᵀ, q·T'_irᵀ), N_q × N_t.
Tensor class_logits_query(const Tensor& q_out, const TextEmbeddings& t_rgb, const TextEmbeddings& t_ir);

struct ClassScores {
  Tensor logits;  // rows × classes, max over each class's tokens
  std::vector<ClassId> classes;
};

ClassScores pool_class_logits(const Tensor& token_logits, const std::vector<ClassId>& token_class);

struct ConvHeadLevel {
  Tensor boxes;   // H × W × 4, normalised
  Tensor logits;  // H × W × N_t
};

std::vector<ConvHeadLevel> conv_head(const ModalityFeatures& f_fused, const TextEmbeddings& t_rgb,
                                     const TextEmbeddings& t_ir, const ConvBoxWeights& w);

/// One detection per query, in selection order.
std::vector<Detection> forward_msgdino(const ModalityFeatures& rgb, const ModalityFeatures& ir,
                                       const TextEmbeddings& t, const HeadWeights& w, const ImageInfo& image,
                                       const HeadOptions& opts = {});

/// One detection per grid position, levels in order, positions row-major.
std::vector<Detection> forward_msyolow(const ModalityFeatures& rgb, const ModalityFeatures& ir,
                                       const TextEmbeddings& t, const HeadWeights& w, const ImageInfo& image,
                                       const HeadOptions& opts = {});

// ---------------------------------------------------------------------------
// Fixture files (MSWT containers)

/// Entries "level0", "level1", ... each shaped [H, W, d].
ModalityFeatures load_features(const std::filesystem::path& path, Modality modality);
void save_features(const ModalityFeatures& f, const std::filesystem::path& path);

/// Entries "tokens" [N_t, d] and "token_class" [N_t] (category ids as floats).
TextEmbeddings load_text(const std::filesystem::path& path);
void save_text(const TextEmbeddings& t, const std::filesystem::path& path);

HeadWeights load_head_weights(const std::filesystem::path& path);

}  // namespace msfk::head
