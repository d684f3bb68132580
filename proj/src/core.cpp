// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/core/types.hpp"

#include <set>

#include "m3i/error.hpp"

namespace m3i::core {

const char* to_string(TransformKind k) {
  switch (k) {
    case TransformKind::augment: return "augment";
    case TransformKind::augment_masked: return "augment_masked";
    case TransformKind::identity_view: return "identity_view";
    case TransformKind::get_category: return "get_category";
    case TransformKind::get_caption: return "get_caption";
  }
  return "?";
}

const char* to_string(ReprKind k) {
  switch (k) {
    case ReprKind::dense_pixels: return "dense_pixels";
    case ReprKind::dense_feature: return "dense_feature";
    case ReprKind::global_feature: return "global_feature";
    case ReprKind::category_embedding: return "category_embedding";
    case ReprKind::text_embedding: return "text_embedding";
  }
  return "?";
}

Representation::Representation(ReprKind k, ad::Var v) : kind(k), values(std::move(v)) {
  if (!is_dense(k) && values.defined() && values.rows() != 1)
    throw ShapeMismatch("global representation must be a single row");
}

void check_partition(const std::vector<TargetGroupSpec>& groups,
                     const std::vector<int>& target_ids) {
  std::set<int> want(target_ids.begin(), target_ids.end());
  std::set<int> seen;
  for (const auto& g : groups) {
    for (int t : g.member_targets) {
      if (!want.count(t))
        throw PartitionViolation("group " + std::to_string(g.group_index) +
                                 " references unknown target " + std::to_string(t));
      if (!seen.insert(t).second)
        throw PartitionViolation("target " + std::to_string(t) + " appears in two groups");
    }
  }
  if (seen.size() != want.size())
    throw PartitionViolation("groups do not cover all targets");
}

const std::vector<Sample>& validate_batch(const std::vector<Sample>& batch,
                                          const BatchRequirements& req) {
  if (batch.empty()) throw ShapeMismatch("empty batch");
  const Image& first = batch.front().image;
  if (req.patch_size <= 0 || first.h % req.patch_size != 0 || first.w % req.patch_size != 0)
    throw ShapeMismatch("image dimensions not divisible by patch size");
  for (const Sample& s : batch) {
    if (!s.image.same_shape(first))
      throw ShapeMismatch("batch images are not homogeneous (sample " + std::to_string(s.id) + ")");
    if (req.needs_category && !s.category.has_value())
      throw MissingTargetField("method '" + req.method_name + "' needs a category but sample " +
                               std::to_string(s.id) + " has none");
    if (req.needs_caption && !s.caption.has_value())
      throw MissingTargetField("method '" + req.method_name + "' needs a caption but sample " +
                               std::to_string(s.id) + " has none");
  }
  return batch;
}

ViewRecord replay_transform(const Sample& sample, const TransformDescriptor& d) {
  if (!d.is_pixel_kind())
    throw KindMismatch("replay_transform on non-pixel descriptor kind");
  if (d.out_h <= 0 || d.out_w <= 0) throw GeometryOutOfBounds("descriptor without output size");
  Image img = crop_resize(sample.image, d.crop_box, d.out_h, d.out_w);
  if (d.flip) img = hflip(img);
  if (d.kind != TransformKind::identity_view) img = apply_photometric(img, d.photo);
  return ViewRecord{std::move(img), d, sample.id};
}

}  // namespace m3i::core
