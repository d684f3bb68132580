// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/transforms/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "m3i/error.hpp"
#include "m3i/rng.hpp"

namespace m3i::transforms {

int MaskPattern::zero_count() const {
  int n = 0;
  for (uint8_t v : grid) n += (v == 0);
  return n;
}

std::vector<int> MaskPattern::visible_indices() const {
  std::vector<int> out;
  for (size_t i = 0; i < grid.size(); ++i)
    if (grid[i]) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> MaskPattern::masked_indices() const {
  std::vector<int> out;
  for (size_t i = 0; i < grid.size(); ++i)
    if (!grid[i]) out.push_back(static_cast<int>(i));
  return out;
}

std::string MaskPattern::serialize() const {
  std::ostringstream os;
  os << gh << " " << gw << " " << patch_size << " " << ratio << ";";
  for (int r = 0; r < gh; ++r) {
    os << "\n";
    for (int c = 0; c < gw; ++c) os << (at(r, c) ? '1' : '0');
  }
  return os.str();
}

MaskPattern MaskPattern::deserialize(const std::string& text) {
  std::istringstream is(text);
  MaskPattern m;
  char semi = 0;
  if (!(is >> m.gh >> m.gw >> m.patch_size >> m.ratio >> semi) || semi != ';')
    throw Error("MaskPattern: malformed header");
  m.grid.assign(static_cast<size_t>(m.gh) * m.gw, 0);
  for (int r = 0; r < m.gh; ++r) {
    std::string row;
    if (!(is >> row) || static_cast<int>(row.size()) != m.gw)
      throw Error("MaskPattern: malformed row " + std::to_string(r));
    for (int c = 0; c < m.gw; ++c) {
      if (row[c] != '0' && row[c] != '1') throw Error("MaskPattern: bad cell");
      m.grid[static_cast<size_t>(r) * m.gw + c] = row[c] == '1';
    }
  }
  return m;
}

core::ViewRecord sample_augmentation(const core::Sample& sample, const AugmentSpec& spec,
                                     uint64_t rng_seed) {
  const core::Image& img = sample.image;
  if (img.h < 2 || img.w < 2) throw ImageTooSmall("source image too small to crop");
  if (spec.crop_scale_lo > spec.crop_scale_hi || spec.crop_scale_lo <= 0.0)
    throw Error("AugmentSpec: invalid crop scale range");

  Rng rng(rng_seed);
  const double src_area = static_cast<double>(img.h) * img.w;

  core::CropBox box;
  bool found = false;
  for (int attempt = 0; attempt < 10 && !found; ++attempt) {
    const double area = src_area * rng.uniform(spec.crop_scale_lo, spec.crop_scale_hi);
    const double log_ratio = rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
    const double aspect = std::exp(log_ratio);
    const int w = static_cast<int>(std::lround(std::sqrt(area * aspect)));
    const int h = static_cast<int>(std::lround(std::sqrt(area / aspect)));
    if (w >= 1 && h >= 1 && w <= img.w && h <= img.h) {
      box.height = h;
      box.width = w;
      box.top = rng.uniform_int(0, img.h - h);
      box.left = rng.uniform_int(0, img.w - w);
      found = true;
    }
  }
  if (!found) {
    // center crop of the short side
    const int side = std::min(img.h, img.w);
    box = {(img.h - side) / 2, (img.w - side) / 2, side, side};
  }

  const bool flip = rng.bernoulli(spec.flip_prob);

  // All photometric draws happen in a fixed order so the parameter vector is
  // a pure function of the seed.
  const uint64_t photo_seed = rng.next_u64();
  Rng prng(photo_seed);
  core::PhotoParams photo;
  const bool apply_jitter = prng.bernoulli(spec.jitter_prob);
  const double b = prng.uniform(std::max(0.0, 1.0 - spec.jitter_strength), 1.0 + spec.jitter_strength);
  const double c = prng.uniform(std::max(0.0, 1.0 - spec.jitter_strength), 1.0 + spec.jitter_strength);
  const double s = prng.uniform(std::max(0.0, 1.0 - spec.jitter_strength), 1.0 + spec.jitter_strength);
  if (apply_jitter && spec.jitter_strength > 0.0) {
    photo.brightness = b;
    photo.contrast = c;
    photo.saturation = s;
  }
  photo.grayscale = prng.bernoulli(spec.grayscale_prob);
  photo.blur = prng.bernoulli(spec.blur_prob);
  photo.solarize = prng.bernoulli(spec.solarize_prob);

  core::TransformDescriptor d;
  d.kind = core::TransformKind::augment;
  d.crop_box = box;
  d.flip = flip;
  d.photometric_seed = photo_seed;
  d.photo = photo;
  d.out_h = spec.out_h;
  d.out_w = spec.out_w;
  return core::replay_transform(sample, d);
}

MaskPattern generate_blockwise_mask(int gh, int gw, double ratio, int patch_size,
                                    uint64_t rng_seed) {
  if (gh <= 0 || gw <= 0 || patch_size <= 0) throw ShapeMismatch("mask grid dims");
  if (ratio < 0.0 || ratio > 1.0) throw Error("mask ratio outside [0,1]");
  MaskPattern m;
  m.gh = gh;
  m.gw = gw;
  m.patch_size = patch_size;
  m.ratio = ratio;
  m.grid.assign(static_cast<size_t>(gh) * gw, 1);

  const int total = gh * gw;
  const int target = static_cast<int>(std::lround(ratio * total));
  if (target == 0) return m;

  Rng rng(rng_seed);
  int zeros = 0;
  std::vector<int> last_rect;
  int attempts = 0;
  const int max_attempts = 64 * total;
  while (zeros < target && attempts < max_attempts) {
    ++attempts;
    const int remaining = target - zeros;
    const int area_cap = std::max(1, remaining / 4);
    const int area = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(area_cap)));
    const double aspect = std::exp(rng.uniform(std::log(0.3), std::log(1.0 / 0.3)));
    int rh = std::max(1, static_cast<int>(std::lround(std::sqrt(area / aspect))));
    int rw = std::max(1, static_cast<int>(std::lround(std::sqrt(area * aspect))));
    rh = std::min(rh, gh);
    rw = std::min(rw, gw);
    const int top = rng.uniform_int(0, gh - rh);
    const int left = rng.uniform_int(0, gw - rw);
    last_rect.clear();
    for (int r = top; r < top + rh && zeros < target + rh * rw; ++r)
      for (int c = left; c < left + rw; ++c) {
        const size_t idx = static_cast<size_t>(r) * gw + c;
        if (m.grid[idx]) {
          m.grid[idx] = 0;
          ++zeros;
          last_rect.push_back(static_cast<int>(idx));
        }
      }
    if (zeros > target) {
      // trim the newest cells of the last rectangle back to the exact count
      int excess = zeros - target;
      for (auto it = last_rect.rbegin(); it != last_rect.rend() && excess > 0; ++it, --excess) {
        m.grid[static_cast<size_t>(*it)] = 1;
        --zeros;
      }
    }
  }
  // degenerate fallback: fill in scan order (only reachable if sampling stalls)
  for (size_t i = 0; i < m.grid.size() && zeros < target; ++i)
    if (m.grid[i]) {
      m.grid[i] = 0;
      ++zeros;
    }
  return m;
}

core::Image mix_views(const core::ViewRecord& view_a, const core::ViewRecord& view_b,
                      const MaskPattern& mask) {
  const core::Image& a = view_a.pixels;
  const core::Image& b = view_b.pixels;
  if (!a.same_shape(b)) throw ShapeMismatch("mix_views: view shapes differ");
  const int p = mask.patch_size;
  if (mask.gh * p != a.h || mask.gw * p != a.w)
    throw ShapeMismatch("mix_views: mask grid does not cover the views");
  core::Image out(a.h, a.w, a.c);
  for (int y = 0; y < a.h; ++y)
    for (int x = 0; x < a.w; ++x) {
      const double mv = mask.at(y / p, x / p) ? 1.0 : 0.0;
      for (int ch = 0; ch < a.c; ++ch)
        out.at(y, x, ch) = mv * a.at(y, x, ch) + (1.0 - mv) * b.at(y, x, ch);
    }
  return out;
}

TokenSet apply_token_drop(const ad::Var& patch_tokens, const MaskPattern& mask,
                          TokenDropMode mode, const ad::Var& mask_embedding) {
  const long n = patch_tokens.rows();
  if (n != static_cast<long>(mask.grid.size()))
    throw ShapeMismatch("apply_token_drop: token count != mask grid size");
  if (mode == TokenDropMode::drop) {
    std::vector<int> keep = mask.visible_indices();
    return TokenSet{ad::gather_rows(patch_tokens, keep), std::move(keep)};
  }
  if (!mask_embedding.defined() || mask_embedding.rows() != 1 ||
      mask_embedding.cols() != patch_tokens.cols())
    throw ShapeMismatch("apply_token_drop: mask embedding shape");
  std::vector<uint8_t> flags(mask.grid.begin(), mask.grid.end());
  ad::Var filler = ad::broadcast_rows(mask_embedding, static_cast<int>(n));
  std::vector<int> all(n);
  for (long i = 0; i < n; ++i) all[static_cast<size_t>(i)] = static_cast<int>(i);
  return TokenSet{ad::select_rows_merge(patch_tokens, filler, flags), std::move(all)};
}

}  // namespace m3i::transforms
