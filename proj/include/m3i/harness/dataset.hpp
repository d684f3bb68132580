// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "m3i/core/types.hpp"

namespace m3i::harness {

// Synthetic dataset: one colored geometric shape per image on a strongly
// textured background, with an integer shape class and a templated caption
// ("a <color> <shape>"). Every sample carries both annotations, so
// supervised, weakly-supervised and self-supervised methods all run on it.
struct ShapesSpec {
  int num_classes = 4;   // shape kinds, up to 8
  int resolution = 32;
  int palette = 6;       // colors in use, up to 8
  int train_size = 2000;
  int val_size = 500;
  uint64_t seed = 1234;
  double texture_amp = 0.9;      // background texture strength
  double shape_contrast = 0.55;  // shape blend opacity
  double shape_min = 0.30;       // shape radius range, fraction of resolution
  double shape_max = 0.42;
};

// Fixed toy vocabulary; tokenization is table lookup.
const std::vector<std::string>& vocabulary();
int token_id(const std::string& word);
const std::vector<std::string>& shape_names();
const std::vector<std::string>& color_names();

// Deterministic in (spec.seed, id); class is id % num_classes.
core::Sample make_sample(const ShapesSpec& spec, int id);

struct Dataset {
  ShapesSpec spec;
  std::vector<core::Sample> train;
  std::vector<core::Sample> val;
};

Dataset build_dataset(const ShapesSpec& spec);

// Portable container: meta.txt + index.tsv + records.bin.
void generate_shapes_dataset(const ShapesSpec& spec, const std::string& dir);
Dataset load_dataset(const std::string& dir);

ShapesSpec shapes_spec_from_file(const std::string& path);

}  // namespace m3i::harness
