// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Trained-behavior acceptance: the collapse demonstration, the desk-scale
// learning-signal comparison, the registry-wide smoke run, and bit-exact
// reproducibility.
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "m3i/harness/dataset.hpp"
#include "m3i/harness/evalkit.hpp"
#include "m3i/harness/metrics.hpp"
#include "m3i/harness/trainer.hpp"
#include "m3i/registry/registry.hpp"
#include "acceptance_util.hpp"

using namespace m3i;
namespace fs = std::filesystem;

namespace {

// canonical 4-class shapes dataset: 2000 train / 500 val at 32x32
const std::string& shapes_dir() {
  static const std::string dir = [] {
    const std::string d = (fs::temp_directory_path() / "m3i_acceptance_shapes").string();
    harness::ShapesSpec spec;
    std::error_code ec;
    fs::remove_all(d, ec);
    harness::generate_shapes_dataset(spec, d);
    return d;
  }();
  return dir;
}

harness::RunConfig base_run(const std::string& method, const std::string& tag) {
  harness::RunConfig cfg;
  cfg.method = method;
  cfg.data_dir = shapes_dir();
  cfg.output_dir = (fs::temp_directory_path() / ("m3i_acceptance_" + tag)).string();
  std::error_code ec;
  fs::remove_all(cfg.output_dir, ec);
  return cfg;
}

std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

double trained_probe(const std::string& ckpt) {
  harness::LoadedModel lm = harness::load_model(ckpt);
  harness::Dataset data = harness::load_dataset(shapes_dir());
  return harness::linear_probe(*lm.model, data);
}

}  // namespace

TEST_CASE("criterion 8: collapse without a regularization mechanism") {
  acceptance::Stopwatch sw;
  harness::Dataset data = harness::load_dataset(shapes_dir());

  bool thresholds_ok = true, ordering_ok = true;
  std::ostringstream detail;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    double stds[2] = {0, 0};
    int k = 0;
    for (const char* mech : {"none", "stop_gradient"}) {
      harness::RunConfig cfg = base_run(std::string("global_distillation[mech=") + mech + "]",
                                        std::string("collapse_") + mech + "_s" +
                                            std::to_string(seed));
      cfg.seed = seed;
      cfg.batch_size = 8;
      cfg.epochs = 2;
      cfg.max_steps = 500;
      cfg.opt.lr = 1e-3;
      cfg.lr_batch_base = 8;
      cfg.opt.weight_decay = 0.0;
      cfg.model.encoder.depth = 2;
      harness::TrainResult res = harness::train(cfg);
      harness::LoadedModel lm = harness::load_model(res.checkpoint_path);
      harness::CollapseReport rep = harness::collapse_report(*lm.model, data);
      stds[k++] = rep.feature_std;
    }
    const double std_none = stds[0], std_sg = stds[1];
    detail << "seed " << seed << ": none " << std_none << " / stop_gradient " << std_sg << "; ";
    thresholds_ok = thresholds_ok && std_none < 0.05 && std_sg > 0.2;
    ordering_ok = ordering_ok && std_none < std_sg;
    CAPTURE(seed);
    CHECK(std_none < 0.05);
    CHECK(std_sg > 0.2);
    CHECK(std_none < std_sg);
  }
  CHECK(sw.seconds() < 600.0);

  const bool ok = thresholds_ok && ordering_ok && sw.seconds() < 600.0;
  acceptance::report(8, ok, detail.str(), sw.seconds());
}

TEST_CASE("criterion 9: the combined method learns a desk-scale signal") {
  acceptance::Stopwatch sw;
  harness::Dataset data = harness::load_dataset(shapes_dir());

  auto ten_epochs = [&](const std::string& method, const std::string& tag) {
    harness::RunConfig cfg = base_run(method, "learn_" + tag);
    cfg.seed = 7;
    cfg.epochs = 10;
    cfg.batch_size = 16;
    cfg.opt.lr = 2e-3;
    cfg.lr_batch_base = 16;
    return harness::train(cfg);
  };

  harness::TrainResult m3i_res = ten_epochs("m3i", "m3i");
  const double acc_m3i = trained_probe(m3i_res.checkpoint_path);

  // random-encoder baseline with the same architecture
  double acc_random;
  {
    harness::LoadedModel lm = harness::load_model(m3i_res.checkpoint_path);
    pipeline::MethodModel random_model(lm.method, lm.run.model, 999);
    acc_random = harness::linear_probe(random_model, data);
  }

  const double acc_mim = trained_probe(ten_epochs("mim_pixel", "mim").checkpoint_path);
  const double acc_id =
      trained_probe(ten_epochs("instance_discrimination", "id").checkpoint_path);
  const double acc_ic =
      trained_probe(ten_epochs("image_classification", "ic").checkpoint_path);

  CHECK(acc_m3i >= 0.85);
  CHECK(acc_m3i >= acc_random + 0.30);
  CHECK(acc_m3i >= acc_mim - 0.02);
  CHECK(acc_m3i >= acc_id - 0.02);
  CHECK(acc_m3i >= acc_ic - 0.02);
  CHECK(sw.seconds() < 1800.0);

  const bool ok = acc_m3i >= 0.85 && acc_m3i >= acc_random + 0.30 &&
                  acc_m3i >= acc_mim - 0.02 && acc_m3i >= acc_id - 0.02 &&
                  acc_m3i >= acc_ic - 0.02 && sw.seconds() < 1800.0;
  std::ostringstream os;
  os << "probe top-1: m3i " << acc_m3i << ", random " << acc_random << ", mim_pixel " << acc_mim
     << ", instance_discrimination " << acc_id << ", image_classification " << acc_ic;
  acceptance::report(9, ok, os.str(), sw.seconds());
}

TEST_CASE("criterion 10: all 15 methods run 50 steps with decreasing loss") {
  acceptance::Stopwatch sw;
  bool all_finite = true, all_decreasing = true;
  std::ostringstream detail;

  for (const auto& name : registry::catalog_names()) {
    harness::RunConfig cfg = base_run(name, "smoke_" + name);
    cfg.seed = 3;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.max_steps = 50;
    cfg.opt.lr = 2e-3;
    cfg.lr_batch_base = 8;
    harness::TrainResult res = harness::train(cfg);
    auto rows = harness::parse_metrics_log(res.metrics_path);
    REQUIRE(rows.size() == 50);

    bool finite = true;
    for (const auto& r : rows) finite = finite && std::isfinite(r.total);
    double head = 0, tail = 0;
    for (int i = 0; i < 10; ++i) {
      head += rows[static_cast<size_t>(i)].total;
      tail += rows[static_cast<size_t>(40 + i)].total;
    }
    head /= 10;
    tail /= 10;
    const bool decreasing = tail < head;
    CAPTURE(name);
    CHECK(finite);
    CHECK(decreasing);
    all_finite = all_finite && finite;
    all_decreasing = all_decreasing && decreasing;
    if (!decreasing) detail << name << " (head " << head << " tail " << tail << ") ";
  }
  CHECK(sw.seconds() < 600.0);

  const bool ok = all_finite && all_decreasing && sw.seconds() < 600.0;
  std::ostringstream os;
  os << "15 methods x 50 steps, all finite: " << all_finite
     << ", trailing means decreasing: " << all_decreasing;
  if (!detail.str().empty()) os << " offenders: " << detail.str();
  acceptance::report(10, ok, os.str(), sw.seconds());
}

TEST_CASE("criterion 11: byte-identical reruns and exact checkpoint resume") {
  acceptance::Stopwatch sw;

  auto run_short = [&](const std::string& tag, int64_t max_steps,
                       const std::string& resume = "") {
    harness::RunConfig cfg = base_run("m3i", "repro_" + tag);
    cfg.seed = 21;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.max_steps = max_steps;
    cfg.model.encoder.dim = 32;
    cfg.model.encoder.depth = 2;
    cfg.model.encoder.heads = 2;
    cfg.model.dec_depth = 1;
    cfg.model.dec_heads = 2;
    return harness::train(cfg, resume);
  };

  harness::TrainResult a = run_short("a", 30);
  harness::TrainResult b = run_short("b", 30);
  const bool metrics_identical = file_bytes(a.metrics_path) == file_bytes(b.metrics_path);
  CHECK(metrics_identical);

  bool params_identical = true;
  {
    nn::Checkpoint ca = nn::load_checkpoint(a.checkpoint_path);
    nn::Checkpoint cb = nn::load_checkpoint(b.checkpoint_path);
    REQUIRE(ca.params.size() == cb.params.size());
    for (size_t i = 0; i < ca.params.size(); ++i)
      params_identical = params_identical && ca.params[i].second == cb.params[i].second;
  }
  CHECK(params_identical);

  harness::TrainResult half = run_short("half", 15);
  harness::TrainResult cont = run_short("half", 30, half.checkpoint_path);
  const bool resume_identical = file_bytes(cont.metrics_path) == file_bytes(a.metrics_path);
  CHECK(resume_identical);

  const bool ok = metrics_identical && params_identical && resume_identical;
  std::ostringstream os;
  os << "identical metrics logs: " << metrics_identical
     << ", identical parameters: " << params_identical
     << ", resume reproduces the full run: " << resume_identical;
  acceptance::report(11, ok, os.str(), sw.seconds());
}
