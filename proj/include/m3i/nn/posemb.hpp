// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "m3i/core/types.hpp"

namespace m3i::nn {

// Continuous patch-grid coordinate (row, col) in some view's patch units.
using Coord = Eigen::Vector2d;

// Fixed 2D sin/cos embeddings evaluated at continuous coordinates; dim must
// be divisible by 4 (half for rows, half for cols, sin/cos interleaved).
Eigen::MatrixXd sincos_2d(const std::vector<Coord>& coords, int dim);
Eigen::MatrixXd sincos_1d(const std::vector<double>& positions, int dim);

// Integer patch centers of a gh x gw grid, row-major.
std::vector<Coord> grid_coords(int gh, int gw);

// Geometry of one view relative to its source image.
struct ViewGeometry {
  core::CropBox crop;
  bool flip = false;
  int view_h = 0, view_w = 0;
  int patch = 1;

  static ViewGeometry of(const core::TransformDescriptor& d, int patch);
};

// Center of target patch (r, c), expressed in the input view's patch units
// with the input's top-left origin. The input's own patch (r, c) maps to
// exactly (r, c).
Coord map_patch_to_input_frame(const ViewGeometry& input, const ViewGeometry& target, int r,
                               int c);

std::vector<Coord> map_grid_to_input_frame(const ViewGeometry& input, const ViewGeometry& target);

}  // namespace m3i::nn
