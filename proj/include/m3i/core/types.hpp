// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "m3i/ad/ad.hpp"
#include "m3i/core/image.hpp"

namespace m3i::core {

// One training record. Category and caption are optional; which of them a
// method needs is decided by its configuration.
struct Sample {
  int id = 0;
  Image image;
  std::optional<int> category;
  std::optional<std::vector<int>> caption;
};

enum class TransformKind : uint8_t {
  augment,
  augment_masked,
  identity_view,
  get_category,
  get_caption,
};

const char* to_string(TransformKind k);

// Fully self-contained recipe for producing a view from its source sample.
// Pixel kinds carry geometry and resolved photometric parameters so replay
// is bit-exact; semantic kinds carry none.
struct TransformDescriptor {
  TransformKind kind = TransformKind::identity_view;
  CropBox crop_box;
  bool flip = false;
  uint64_t photometric_seed = 0;
  PhotoParams photo;
  int out_h = 0, out_w = 0;
  std::optional<int> mask_ref;

  bool operator==(const TransformDescriptor&) const = default;
  bool is_pixel_kind() const {
    return kind == TransformKind::augment || kind == TransformKind::augment_masked ||
           kind == TransformKind::identity_view;
  }
};

struct ViewRecord {
  Image pixels;
  TransformDescriptor descriptor;
  int source_sample_id = 0;
};

enum class ReprKind : uint8_t {
  dense_pixels,
  dense_feature,
  global_feature,
  category_embedding,
  text_embedding,
};

const char* to_string(ReprKind k);
inline bool is_dense(ReprKind k) {
  return k == ReprKind::dense_pixels || k == ReprKind::dense_feature;
}

// Encoded representation. Dense kinds are grid x dim (rows in row-major
// patch-grid order), global kinds are 1 x dim. Values may carry gradient.
struct Representation {
  ReprKind kind = ReprKind::dense_feature;
  ad::Var values;

  Representation() = default;
  Representation(ReprKind k, ad::Var v);
};

enum class LossWeightRole : uint8_t { ssp, sp };

struct TargetGroupSpec {
  int group_index = 0;
  std::vector<int> member_targets;
  std::string head;  // prediction-head id; resolved by the loss assembler
  LossWeightRole loss_weight_role = LossWeightRole::ssp;
};

// Throws PartitionViolation unless the groups exactly partition target_ids.
void check_partition(const std::vector<TargetGroupSpec>& groups,
                     const std::vector<int>& target_ids);

// What a batch must supply for a given method configuration.
struct BatchRequirements {
  bool needs_category = false;
  bool needs_caption = false;
  int patch_size = 1;
  std::string method_name;
};

// Returns the batch unchanged when every sample satisfies `req` and all
// image shapes are homogeneous and divisible by the patch size.
const std::vector<Sample>& validate_batch(const std::vector<Sample>& batch,
                                          const BatchRequirements& req);

// Reproduces a view from (sample, descriptor). Pure: identical inputs give
// byte-identical pixels.
ViewRecord replay_transform(const Sample& sample, const TransformDescriptor& descriptor);

}  // namespace m3i::core
