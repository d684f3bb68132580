// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/nn/posemb.hpp"

#include <cmath>

#include "m3i/error.hpp"

namespace m3i::nn {

Eigen::MatrixXd sincos_1d(const std::vector<double>& positions, int dim) {
  if (dim % 2 != 0) throw ShapeMismatch("sincos_1d: dim must be even");
  const int half = dim / 2;
  Eigen::MatrixXd out(static_cast<long>(positions.size()), dim);
  for (size_t i = 0; i < positions.size(); ++i) {
    for (int k = 0; k < half; ++k) {
      const double omega = std::pow(10000.0, -static_cast<double>(k) / half);
      out(static_cast<long>(i), 2 * k) = std::sin(positions[i] * omega);
      out(static_cast<long>(i), 2 * k + 1) = std::cos(positions[i] * omega);
    }
  }
  return out;
}

Eigen::MatrixXd sincos_2d(const std::vector<Coord>& coords, int dim) {
  if (dim % 4 != 0) throw ShapeMismatch("sincos_2d: dim must be divisible by 4");
  std::vector<double> rows(coords.size()), cols(coords.size());
  for (size_t i = 0; i < coords.size(); ++i) {
    rows[i] = coords[i](0);
    cols[i] = coords[i](1);
  }
  Eigen::MatrixXd out(static_cast<long>(coords.size()), dim);
  out.leftCols(dim / 2) = sincos_1d(rows, dim / 2);
  out.rightCols(dim / 2) = sincos_1d(cols, dim / 2);
  return out;
}

std::vector<Coord> grid_coords(int gh, int gw) {
  std::vector<Coord> out;
  out.reserve(static_cast<size_t>(gh) * gw);
  for (int r = 0; r < gh; ++r)
    for (int c = 0; c < gw; ++c) out.emplace_back(static_cast<double>(r), static_cast<double>(c));
  return out;
}

ViewGeometry ViewGeometry::of(const core::TransformDescriptor& d, int patch) {
  return ViewGeometry{d.crop_box, d.flip, d.out_h, d.out_w, patch};
}

Coord map_patch_to_input_frame(const ViewGeometry& input, const ViewGeometry& target, int r,
                               int c) {
  // target patch center in target-view pixels (continuous, corner origin)
  double ty = (r + 0.5) * target.patch;
  double tx = (c + 0.5) * target.patch;
  if (target.flip) tx = target.view_w - tx;
  // into source pixels
  const double sy = target.crop.top + ty / target.view_h * target.crop.height;
  const double sx = target.crop.left + tx / target.view_w * target.crop.width;
  // into input-view pixels
  double iy = (sy - input.crop.top) / input.crop.height * input.view_h;
  double ix = (sx - input.crop.left) / input.crop.width * input.view_w;
  if (input.flip) ix = input.view_w - ix;
  // into patch units
  return Coord(iy / input.patch - 0.5, ix / input.patch - 0.5);
}

std::vector<Coord> map_grid_to_input_frame(const ViewGeometry& input, const ViewGeometry& target) {
  const int gh = target.view_h / target.patch;
  const int gw = target.view_w / target.patch;
  std::vector<Coord> out;
  out.reserve(static_cast<size_t>(gh) * gw);
  for (int r = 0; r < gh; ++r)
    for (int c = 0; c < gw; ++c) out.push_back(map_patch_to_input_frame(input, target, r, c));
  return out;
}

}  // namespace m3i::nn
