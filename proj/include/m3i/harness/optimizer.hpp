// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "m3i/nn/params.hpp"

namespace m3i::harness {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.05;
  double eps = 1e-8;
};

// Adam with decoupled weight decay. Decay is applied to weight matrices
// only (row vectors hold biases, norms and single tokens).
class AdamW {
 public:
  AdamW(const nn::ParamStore& params, AdamConfig cfg);

  // lr_scale multiplies the configured peak rate (warmup/cosine schedule).
  void step(nn::ParamStore& params, double lr_scale);

  int64_t t() const { return t_; }
  const std::vector<std::pair<std::string, Eigen::MatrixXd>>& moments_m() const { return m_; }
  const std::vector<std::pair<std::string, Eigen::MatrixXd>>& moments_v() const { return v_; }
  void restore(int64_t t, std::vector<std::pair<std::string, Eigen::MatrixXd>> m,
               std::vector<std::pair<std::string, Eigen::MatrixXd>> v);

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> m_, v_;
};

// Linear warmup to 1, then cosine decay to 0 (or constant when disabled).
double lr_schedule(int64_t step, int64_t total_steps, double warmup_frac, bool cosine);

}  // namespace m3i::harness
