// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "m3i/nn/params.hpp"

namespace m3i::nn {

// Versioned training snapshot. Matrices are written row-major as raw f64
// little-endian bytes, so save -> load -> save is byte-identical.
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  std::string method_config_text;  // the run's full configuration, key = value lines
  uint64_t step = 0;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> params;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> ema_params;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> opt_m;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> opt_v;
  std::map<std::string, double> scalars;   // dynamic-weight state, schedule, etc.
  std::vector<uint64_t> rng_state;

  static std::vector<std::pair<std::string, Eigen::MatrixXd>> snapshot(const ParamStore& store);
  // Overwrites values of existing params; throws IncompatibleCheckpoint on
  // name or shape mismatch.
  static void restore(ParamStore& store,
                      const std::vector<std::pair<std::string, Eigen::MatrixXd>>& values);
};

// Atomic write (temp file + rename).
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace m3i::nn
