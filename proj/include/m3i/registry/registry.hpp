// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "m3i/core/types.hpp"
#include "m3i/heads/heads.hpp"
#include "m3i/nn/encoders.hpp"

namespace m3i::registry {

enum class InputTransform : uint8_t { view1, masked_view1, view2, masked_view2 };
enum class TargetTransform : uint8_t { view1, category, text };

const char* to_string(InputTransform t);
const char* to_string(TargetTransform t);
inline bool is_masked(InputTransform t) {
  return t == InputTransform::masked_view1 || t == InputTransform::masked_view2;
}
inline bool is_intra_view(InputTransform t) {
  return t == InputTransform::view1 || t == InputTransform::masked_view1;
}

// One pre-training method: a single-input single-target configuration, or
// the combined multi-input multi-target method when `is_m3i` is set.
struct MethodConfig {
  std::string name;
  InputTransform input_transform = InputTransform::view1;
  TargetTransform target_transform = TargetTransform::view1;
  core::ReprKind target_repr = core::ReprKind::dense_feature;
  heads::PredictionHead head;
  heads::RegularizerSpec regularizer;
  nn::TargetEncoderConfig target_encoder;
  bool loss_on_masked_only = false;
  double label_smoothing = 0.0;
  bool experimental = false;   // no typical prior work; hyper-parameters inherited
  bool is_m3i = false;

  // multi-input multi-target specifics
  TargetTransform semantic_target = TargetTransform::category;
  double gamma = 1.0;  // gradient-ratio weight between self-supervised and semantic terms
};

// Canonical catalog entry by name. Instance-discrimination variants are
// addressed as "instance_discrimination[mech=negatives|stop_gradient|
// decorrelation]". Throws UnknownMethod.
MethodConfig get_method(const std::string& name);

// The 15 canonical names in stable order.
const std::vector<std::string>& catalog_names();

// Rule check; entries starting with "warning:" do not fail validation.
std::vector<std::string> validate_method(const MethodConfig& cfg);
bool is_valid(const std::vector<std::string>& violations);

core::BatchRequirements requirements_of(const MethodConfig& cfg);

// spec-shaped convenience: validate a batch against a method configuration
inline const std::vector<core::Sample>& validate_batch(const std::vector<core::Sample>& batch,
                                                       const MethodConfig& cfg, int patch_size) {
  auto req = requirements_of(cfg);
  req.patch_size = patch_size;
  return core::validate_batch(batch, req);
}

// One line per method: name, input, target, repr, head, regularizer.
std::string list_methods_tsv();

}  // namespace m3i::registry
