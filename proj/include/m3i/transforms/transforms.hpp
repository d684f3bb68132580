// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "m3i/ad/ad.hpp"
#include "m3i/core/types.hpp"

namespace m3i::transforms {

// Patch-grid binary mask. grid[r*gw+c] == 1 marks the visible / first-image
// cell; 0 marks the masked / second-image cell. Constant over each p x p
// pixel block by construction.
struct MaskPattern {
  int gh = 0, gw = 0;
  int patch_size = 1;
  double ratio = 0.0;
  std::vector<uint8_t> grid;

  uint8_t at(int r, int c) const { return grid[static_cast<size_t>(r) * gw + c]; }
  int zero_count() const;
  std::vector<int> visible_indices() const;  // grid indices where mask == 1
  std::vector<int> masked_indices() const;   // grid indices where mask == 0

  // "gh gw p ratio;" followed by gh rows of 0/1 characters.
  std::string serialize() const;
  static MaskPattern deserialize(const std::string& text);
};

struct AugmentSpec {
  double crop_scale_lo = 0.67;
  double crop_scale_hi = 1.0;
  double flip_prob = 0.5;
  double jitter_strength = 0.4;
  double jitter_prob = 0.8;
  double grayscale_prob = 0.2;
  double blur_prob = 0.1;
  double solarize_prob = 0.1;
  int out_h = 32, out_w = 32;
};

// Draws a random crop/flip/photometric view. The returned descriptor replays
// bit-exactly through core::replay_transform.
core::ViewRecord sample_augmentation(const core::Sample& sample, const AugmentSpec& spec,
                                     uint64_t rng_seed);

// Blockwise mask with an exact zero count of round(ratio*gh*gw). Zeros are
// laid down as random rectangles (aspect in [0.3, 1/0.3], area at most 25%
// of the remaining budget); the final rectangle is trimmed in scan order to
// hit the count exactly.
MaskPattern generate_blockwise_mask(int gh, int gw, double ratio, int patch_size,
                                    uint64_t rng_seed);

// Pixel mix m*a + (1-m)*b with the patch mask replicated p x p.
core::Image mix_views(const core::ViewRecord& view_a, const core::ViewRecord& view_b,
                      const MaskPattern& mask);

enum class TokenDropMode : uint8_t { drop, mask_token };

// Token set after masking: rows of `tokens` aligned with `grid_indices`.
struct TokenSet {
  ad::Var tokens;
  std::vector<int> grid_indices;
};

// drop: keep only visible rows (original grid indices recorded).
// mask_token: substitute `mask_embedding` (1 x dim) at masked rows, keeping
// the full grid length.
TokenSet apply_token_drop(const ad::Var& patch_tokens, const MaskPattern& mask,
                          TokenDropMode mode, const ad::Var& mask_embedding = {});

}  // namespace m3i::transforms
