// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <vector>

#include "m3i/pipeline/pipeline.hpp"

namespace m3i::objective {

// Target-view layout for the two mixed images: whether each image's dense
// target view equals its input view ("same") or is a fresh augmentation.
enum class TargetViewLayout : uint8_t {
  layout_default,  // first same, second different
  layout_a,        // same / same
  layout_b,        // different / different
  layout_c,        // different / same
};

TargetViewLayout layout_from_string(const std::string& s);
const char* to_string(TargetViewLayout l);

// One mixed pair: image i occupies the mask's 1-cells of the mixed input,
// image j the 0-cells.
struct M3IPair {
  core::Sample sample_i, sample_j;
  core::ViewRecord input_view_i, input_view_j;
  core::ViewRecord target_view_i, target_view_j;
  transforms::MaskPattern mask;
  core::Image mixed_input;
};

struct M3IBatch {
  std::vector<M3IPair> pairs;
  TargetViewLayout layout = TargetViewLayout::layout_default;
};

M3IBatch build_m3i_batch(const std::vector<std::pair<core::Sample, core::Sample>>& pairs,
                         const transforms::AugmentSpec& spec, int grid_h, int grid_w,
                         double mask_ratio, int patch_size, TargetViewLayout layout,
                         uint64_t rng_seed);

// Gradient-ratio loss balancing: lambda = gamma * g_ssp_ema / max(g_sp_ema, eps).
struct DynamicWeightState {
  double g_ssp_ema = 0.0;
  double g_sp_ema = 0.0;
  double gamma = 1.0;
  double ema_coeff = 0.99;
  bool initialized = false;  // first measurement seeds the averages

  double lambda() const;
};

DynamicWeightState update_dynamic_weight(const DynamicWeightState& state, double grad_ssp_norm,
                                         double grad_sp_norm);

// Per-group negative log-likelihood assembly over an explicit target
// partition. Group value is the sum of its members' NLLs.
struct TargetItem {
  core::Representation prediction;
  core::Representation target;
  heads::PredictionHead head;
  std::vector<core::Representation> negatives;  // boltzmann candidates beyond the positive
};

std::vector<ad::Var> grouped_loss(const std::vector<core::TargetGroupSpec>& groups,
                                  const std::map<int, TargetItem>& items);

struct M3ILossOutput {
  ad::Var total;        // ssp_i + ssp_j + lambda * (sp_i + sp_j)
  ad::Var ssp_sum;      // ssp_i + ssp_j
  ad::Var sp_sum;       // sp_i + sp_j
  double ssp_i = 0, ssp_j = 0, sp_i = 0, sp_j = 0;
  // encoder output over the mixed inputs
  nn::EncodedBatch encoded;
  // gradient-measurement boundary at the encoder output; defined only when
  // the loss was built with cut_encoder_boundary
  ad::Var boundary;
  Eigen::MatrixXd global_features;
};

// Builds the four-group loss. With cut_encoder_boundary the branch losses
// hang off a leaf copy of the encoder output so the per-branch gradient
// norms can be measured at that point before the encoder backward runs.
M3ILossOutput compute_m3i_loss(pipeline::MethodModel& model, const M3IBatch& batch, double lambda,
                               bool cut_encoder_boundary);

}  // namespace m3i::objective
