// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "m3i/nn/checkpoint.hpp"
#include "m3i/nn/decoders.hpp"
#include "m3i/nn/encoders.hpp"
#include "m3i/registry/registry.hpp"
#include "m3i/transforms/transforms.hpp"

namespace m3i::pipeline {

// Architecture and augmentation settings shared by every method.
struct ModelConfig {
  nn::EncoderConfig encoder;
  int dec_depth = 2;
  int dec_heads = 4;
  double mask_ratio = 0.5;
  transforms::AugmentSpec augment;
  transforms::TokenDropMode drop_mode = transforms::TokenDropMode::drop;
  int num_classes = 4;
  int vocab_size = 0;
  int text_depth = 2;
  // pool semantic predictions from decoder output instead of encoder output
  bool pool_decoder_output = false;
};

// Owns the parameter store and the parameterized components a method needs.
class MethodModel {
 public:
  MethodModel(const registry::MethodConfig& mcfg, const ModelConfig& mdl, uint64_t seed);

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  nn::ParamStore& momentum() { return momentum_; }
  bool uses_momentum() const { return uses_momentum_; }
  // one EMA step of the momentum encoder copy
  void momentum_update();
  // re-synchronize the EMA copy (used after checkpoint restore)
  void reset_momentum_to_online();

  const registry::MethodConfig& method() const { return mcfg_; }
  const ModelConfig& model_config() const { return mdl_; }

  const nn::VisionEncoder& encoder() const { return *encoder_; }
  const nn::DenseDecoder& image_decoder() const { return *dec_img_; }
  const nn::AttentionPool& global_pool() const { return *pool_glob_; }
  const nn::AttentionPool& semantic_pool() const { return *pool_sem_; }
  const nn::TextEncoder& text_encoder() const { return *text_; }
  const nn::CategoryTable& categories() const { return *cats_; }
  bool has_image_decoder() const { return dec_img_ != nullptr; }
  bool has_semantic_pool() const { return pool_sem_ != nullptr; }

  // parameter-name prefixes of the semantic (supervised) branch
  std::vector<std::string> semantic_prefixes() const;

 private:
  registry::MethodConfig mcfg_;
  ModelConfig mdl_;
  nn::ParamStore params_;
  nn::ParamStore momentum_;
  bool uses_momentum_ = false;
  std::unique_ptr<nn::VisionEncoder> encoder_;
  std::unique_ptr<nn::DenseDecoder> dec_img_;
  std::unique_ptr<nn::AttentionPool> pool_glob_;
  std::unique_ptr<nn::AttentionPool> pool_sem_;
  std::unique_ptr<nn::TextEncoder> text_;
  std::unique_ptr<nn::CategoryTable> cats_;
};

struct LossOutput {
  ad::Var total;
  // named scalar breakdown, e.g. {"loss", ...} or the four combined terms
  std::vector<std::pair<std::string, double>> terms;
  // online encoder output over the batch (dense tokens)
  nn::EncodedBatch encoded;
  // per-sample mean-pooled encoder features (values only; collapse metrics)
  Eigen::MatrixXd global_features;
};

// Deterministic per-sample view construction for single-target methods.
struct SampleViews {
  core::ViewRecord target_view;              // "view1"
  core::ViewRecord input_view;               // equals target_view for intra-view methods
  std::optional<transforms::MaskPattern> mask;
};

SampleViews build_views(const core::Sample& sample, const registry::MethodConfig& mcfg,
                        const ModelConfig& mdl, uint64_t run_seed, uint64_t epoch);

// Assembles the full loss graph for one optimizer step of a single-input
// single-target method.
LossOutput build_single_target_loss(MethodModel& model, const std::vector<core::Sample>& batch,
                                    uint64_t run_seed, uint64_t epoch);

// Mean-pooled encoder features for a batch of unaugmented (identity) views;
// used by evaluation and probes. Returns batch x dim values.
Eigen::MatrixXd extract_global_features(const MethodModel& model,
                                        const std::vector<core::Sample>& batch);

core::TransformDescriptor identity_descriptor(const core::Sample& s, int out_h, int out_w);

}  // namespace m3i::pipeline
