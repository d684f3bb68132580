// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace m3i::harness {

// Renders SVG plots from a metrics log: losses.svg (per-term curves when the
// combined-method terms are present, otherwise the total), lambda.svg, and
// collapse.svg (feature_std and effective_rank). An empty log produces no
// files. Returns the written file paths.
std::vector<std::string> emit_plots(const std::string& log_path, const std::string& out_dir);

}  // namespace m3i::harness
