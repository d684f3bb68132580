// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace m3i::harness {

// One JSON line per optimizer step, fixed field list, stable formatting.
struct MetricsRow {
  int64_t step = 0;
  double total = 0;
  double ssp_i = 0, ssp_j = 0, sp_i = 0, sp_j = 0;
  double lambda = 1.0;
  double g_ssp_ema = 0, g_sp_ema = 0;
  double feature_std = 0;
  double effective_rank = 0;
  double lr = 0;
};

// The published schema, in emission order.
const std::vector<std::string>& metrics_fields();

std::string format_metrics_line(const MetricsRow& row);
// Throws MalformedLog (with a 1-based line number) on any schema deviation.
std::vector<MetricsRow> parse_metrics_log(const std::string& path);

// Batch feature diagnostics.
double feature_std(const Eigen::MatrixXd& features);
double effective_rank(const Eigen::MatrixXd& features);

}  // namespace m3i::harness
