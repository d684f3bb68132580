// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/core/image.hpp"

#include <algorithm>
#include <cmath>

#include "m3i/error.hpp"

namespace m3i::core {

namespace {
double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }
}  // namespace

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

Image crop_resize(const Image& src, const CropBox& box, int out_h, int out_w) {
  if (box.top < 0 || box.left < 0 || box.height <= 0 || box.width <= 0 ||
      box.top + box.height > src.h || box.left + box.width > src.w)
    throw GeometryOutOfBounds("crop box outside source image");
  Image out(out_h, out_w, src.c);
  const double sy_scale = static_cast<double>(box.height) / out_h;
  const double sx_scale = static_cast<double>(box.width) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    double sy = box.top + (oy + 0.5) * sy_scale - 0.5;
    sy = std::min(std::max(sy, static_cast<double>(box.top)),
                  static_cast<double>(box.top + box.height - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, box.top + box.height - 1);
    const double fy = sy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      double sx = box.left + (ox + 0.5) * sx_scale - 0.5;
      sx = std::min(std::max(sx, static_cast<double>(box.left)),
                    static_cast<double>(box.left + box.width - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, box.left + box.width - 1);
      const double fx = sx - x0;
      for (int ch = 0; ch < src.c; ++ch) {
        const double v = (1 - fy) * ((1 - fx) * src.at(y0, x0, ch) + fx * src.at(y0, x1, ch)) +
                         fy * ((1 - fx) * src.at(y1, x0, ch) + fx * src.at(y1, x1, ch));
        out.at(oy, ox, ch) = v;
      }
    }
  }
  return out;
}

Image hflip(const Image& img) {
  Image out(img.h, img.w, img.c);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) out.at(y, x, ch) = img.at(y, img.w - 1 - x, ch);
  return out;
}

Image apply_photometric(const Image& img, const PhotoParams& p) {
  Image out = img;
  const bool rgb = img.c == 3;

  if (p.brightness != 1.0) {
    for (double& v : out.data) v = clamp01(v * p.brightness);
  }
  if (p.contrast != 1.0) {
    double mean = 0.0;
    if (rgb) {
      for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
          mean += luma(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2));
      mean /= static_cast<double>(out.h) * out.w;
    } else {
      for (double v : out.data) mean += v;
      mean /= static_cast<double>(out.data.size());
    }
    for (double& v : out.data) v = clamp01(mean + (v - mean) * p.contrast);
  }
  if (p.saturation != 1.0 && rgb) {
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        const double l = luma(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2));
        for (int ch = 0; ch < 3; ++ch)
          out.at(y, x, ch) = clamp01(l + (out.at(y, x, ch) - l) * p.saturation);
      }
  }
  if (p.grayscale && rgb) {
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        const double l = luma(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2));
        for (int ch = 0; ch < 3; ++ch) out.at(y, x, ch) = l;
      }
  }
  if (p.blur) {
    // separable 3x3 binomial kernel, reflect padding
    Image tmp = out;
    auto refl = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x)
        for (int ch = 0; ch < out.c; ++ch)
          tmp.at(y, x, ch) = 0.25 * out.at(y, refl(x - 1, out.w), ch) +
                             0.5 * out.at(y, x, ch) + 0.25 * out.at(y, refl(x + 1, out.w), ch);
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x)
        for (int ch = 0; ch < out.c; ++ch)
          out.at(y, x, ch) = 0.25 * tmp.at(refl(y - 1, out.h), x, ch) +
                             0.5 * tmp.at(y, x, ch) + 0.25 * tmp.at(refl(y + 1, out.h), x, ch);
  }
  if (p.solarize) {
    for (double& v : out.data) v = v < 0.5 ? v : 1.0 - v;
  }
  return out;
}

}  // namespace m3i::core
