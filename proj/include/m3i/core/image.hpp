// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

namespace m3i::core {

// Channel-last image, values in [0,1], flattened row-major as (y*w + x)*c + ch.
struct Image {
  int h = 0, w = 0, c = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h_, int w_, int c_) : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, 0.0) {}

  double& at(int y, int x, int ch) { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
  double at(int y, int x, int ch) const { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
  size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }
};

struct CropBox {
  int top = 0, left = 0, height = 0, width = 0;
  bool operator==(const CropBox&) const = default;
};

// Resolved photometric parameters; scales of 1 and flags of false are no-ops.
struct PhotoParams {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  bool grayscale = false;
  bool blur = false;
  bool solarize = false;
  bool operator==(const PhotoParams&) const = default;
};

// Bilinear crop-resize with half-pixel centers; sampling is clamped to the
// crop region. Equal crop/output sizes reduce to an exact copy.
Image crop_resize(const Image& src, const CropBox& box, int out_h, int out_w);
Image hflip(const Image& img);
Image apply_photometric(const Image& img, const PhotoParams& params);
double luma(double r, double g, double b);

}  // namespace m3i::core
