// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "m3i/ad/ad.hpp"
#include "m3i/core/types.hpp"
#include "m3i/nn/params.hpp"
#include "m3i/nn/posemb.hpp"
#include "m3i/transforms/transforms.hpp"

namespace m3i::nn {

struct EncoderConfig {
  int patch_size = 4;
  int dim = 64;
  int depth = 4;
  int heads = 4;
  int view_h = 32, view_w = 32;
  int mlp_ratio = 4;
  int channels = 3;

  int grid_h() const { return view_h / patch_size; }
  int grid_w() const { return view_w / patch_size; }
  int tokens() const { return grid_h() * grid_w(); }
  void check() const;
};

enum class TargetKind : uint8_t { identity_pixels, shared, momentum, category_table, text_encoder };

const char* to_string(TargetKind k);

struct TargetEncoderConfig {
  TargetKind kind = TargetKind::momentum;
  double ema_coeff = 0.995;
  int num_classes = 0;   // category_table
  int text_depth = 2;    // text_encoder
  int text_dim = 64;
  int vocab_size = 0;
};

// grid x (p*p*c) patch rows in row-major grid order
Eigen::MatrixXd patchify(const core::Image& img, int patch_size);
core::Image unpatchify(const Eigen::MatrixXd& patches, int gh, int gw, int patch_size, int channels);

// Dense token batch produced by an encoder: `tokens` stacks per-sample row
// blocks of `tokens_per_sample` rows; `grid_indices[b]` maps each row of
// sample b back to its position in the full patch grid.
struct EncodedBatch {
  ad::Var tokens;
  int batch = 0;
  int tokens_per_sample = 0;
  std::vector<std::vector<int>> grid_indices;
};

// ViT-style encoder: linear patch embedding, fixed sin/cos position
// embeddings, pre-LN transformer blocks, final LN.
class VisionEncoder {
 public:
  VisionEncoder(EncoderConfig cfg, std::string prefix = "encoder/");

  const EncoderConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }

  void register_params(ParamStore& store, uint64_t seed) const;

  // Full-grid forward over a batch of views.
  EncodedBatch forward(const ParamStore& store, const std::vector<const core::Image*>& views) const;

  // Forward with per-sample masks. drop mode shortens the sequence to the
  // visible tokens; mask_token mode substitutes the learned embedding.
  EncodedBatch forward_masked(const ParamStore& store,
                              const std::vector<const core::Image*>& views,
                              const std::vector<const transforms::MaskPattern*>& masks,
                              transforms::TokenDropMode mode) const;

 private:
  ad::Var run_blocks(const ParamStore& store, ad::Var x, int batch, int n_tokens) const;
  EncoderConfig cfg_;
  std::string prefix_;
};

// Token-embedding transformer with mean pooling and a projection head.
class TextEncoder {
 public:
  TextEncoder(int vocab_size, int dim, int depth, int heads, int out_dim,
              std::string prefix = "text/");
  void register_params(ParamStore& store, uint64_t seed) const;
  // one pooled embedding row per caption
  ad::Var forward(const ParamStore& store, const std::vector<std::vector<int>>& captions) const;

 private:
  int vocab_, dim_, depth_, heads_, out_dim_;
  std::string prefix_;
};

// Rows of a trainable embedding table; doubles as the linear-classifier
// weight when used as the Boltzmann candidate set.
class CategoryTable {
 public:
  CategoryTable(int num_classes, int dim, std::string prefix = "cat/");
  void register_params(ParamStore& store, uint64_t seed) const;
  ad::Var embed(const ParamStore& store, const std::vector<int>& classes) const;
  ad::Var table(const ParamStore& store) const;

 private:
  int num_classes_, dim_;
  std::string prefix_;
};

// Input to the generic target-encoding entry point.
struct TargetInput {
  const core::ViewRecord* view = nullptr;
  std::optional<int> category;
  const std::vector<int>* caption = nullptr;
};

// Components a target encoder may need; `store` carries online parameters,
// `momentum_store` the EMA copy of the encoder.
struct TargetEncoderContext {
  const VisionEncoder* encoder = nullptr;
  const ParamStore* store = nullptr;
  const ParamStore* momentum_store = nullptr;
  const TextEncoder* text = nullptr;
  const CategoryTable* categories = nullptr;
  // projection applied to pooled features for global targets
  std::string global_proj_prefix = "target_global/";
};

void register_global_proj(ParamStore& store, int dim, uint64_t seed,
                          const std::string& prefix = "target_global/");

// Dispatch on cfg.kind; throws KindMismatch when `y` lacks the needed field.
core::Representation encode_target(const TargetInput& y, const TargetEncoderConfig& cfg,
                                   const TargetEncoderContext& ctx, core::ReprKind want);

}  // namespace m3i::nn
