// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "m3i/harness/dataset.hpp"
#include "m3i/harness/optimizer.hpp"
#include "m3i/objective/m3i_objective.hpp"
#include "m3i/pipeline/pipeline.hpp"

namespace m3i::harness {

struct RunConfig {
  std::string method = "mim_pixel";
  std::string data_dir;
  std::string output_dir = "run_out";
  uint64_t seed = 0;
  int epochs = 1;
  int batch_size = 8;  // samples per step; the combined method pairs them
  int ckpt_every = 0;  // steps; 0 = final only
  int64_t max_steps = -1;

  AdamConfig opt;
  double warmup_frac = 0.05;
  bool cosine = true;
  int lr_batch_base = 32;  // linear lr scaling reference batch

  pipeline::ModelConfig model;

  // head overrides
  double sigma = 1.0;
  double tau = 0.2;

  // combined-method settings
  objective::TargetViewLayout layout = objective::TargetViewLayout::layout_default;
  double gamma = 1.0;
  double dw_ema = 0.99;
  std::string semantic = "category";

  int64_t inject_nan_step = -1;  // debug hook exercising the NaNLoss path

  void check() const;
};

// Parses and schema-checks a config file; unknown keys are rejected.
// M3I_OUTPUT_DIR overrides output_dir when set.
RunConfig run_config_from_file(const std::string& path);
std::string run_config_to_text(const RunConfig& cfg);
RunConfig run_config_from_text(const std::string& text);

struct TrainResult {
  std::string checkpoint_path;
  std::string metrics_path;
  int64_t steps = 0;
  double final_loss = 0.0;
};

TrainResult train(const RunConfig& cfg, const std::string& resume_from = "");

// Rebuilds a model from a checkpoint (config text + parameters + EMA copy).
struct LoadedModel {
  RunConfig run;
  registry::MethodConfig method;
  std::unique_ptr<pipeline::MethodModel> model;
  uint64_t step = 0;
};
LoadedModel load_model(const std::string& ckpt_path);

registry::MethodConfig method_from_run(const RunConfig& cfg);

}  // namespace m3i::harness
