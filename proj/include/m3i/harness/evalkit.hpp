// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "m3i/harness/dataset.hpp"
#include "m3i/pipeline/pipeline.hpp"

namespace m3i::harness {

// Frozen global features over a sample set (identity views, chunked).
Eigen::MatrixXd frozen_features(const pipeline::MethodModel& model,
                                const std::vector<core::Sample>& samples, int chunk = 64);

// Multinomial logistic regression on frozen features; returns val top-1.
double linear_probe_accuracy(const Eigen::MatrixXd& train_x, const std::vector<int>& train_y,
                             const Eigen::MatrixXd& val_x, const std::vector<int>& val_y,
                             int num_classes, uint64_t seed = 0);

double linear_probe(const pipeline::MethodModel& model, const Dataset& data, uint64_t seed = 0);
// Spec-shaped entry: rebuilds the model from a checkpoint.
double linear_probe(const std::string& ckpt_path, const std::string& data_dir);

struct CollapseReport {
  double feature_std = 0;
  double effective_rank = 0;
  double boltzmann_entropy = 0;
};

CollapseReport collapse_report(const pipeline::MethodModel& model, const Dataset& data,
                               double tau = 0.2);
CollapseReport collapse_report(const std::string& ckpt_path, const std::string& data_dir);

}  // namespace m3i::harness
