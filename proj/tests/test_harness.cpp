// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "m3i/error.hpp"
#include "m3i/harness/cli.hpp"
#include "m3i/harness/dataset.hpp"
#include "m3i/harness/evalkit.hpp"
#include "m3i/harness/metrics.hpp"
#include "m3i/harness/plots.hpp"
#include "m3i/harness/trainer.hpp"
#include "m3i/rng.hpp"

using namespace m3i;
using harness::Dataset;
using harness::RunConfig;
using harness::ShapesSpec;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
  const auto p = fs::temp_directory_path() / ("m3i_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

// small shared dataset on disk for trainer tests
const std::string& small_data_dir() {
  static const std::string dir = [] {
    ShapesSpec spec;
    spec.train_size = 192;
    spec.val_size = 64;
    spec.seed = 909;
    const std::string d = temp_dir("data_small");
    harness::generate_shapes_dataset(spec, d);
    return d;
  }();
  return dir;
}

RunConfig small_run(const std::string& method, const std::string& out_tag) {
  RunConfig cfg;
  cfg.method = method;
  cfg.data_dir = small_data_dir();
  cfg.output_dir = temp_dir(out_tag);
  cfg.seed = 11;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.max_steps = 12;
  cfg.model.encoder.dim = 32;
  cfg.model.encoder.depth = 2;
  cfg.model.encoder.heads = 2;
  cfg.model.dec_depth = 1;
  cfg.model.dec_heads = 2;
  return cfg;
}

int run_cli(std::vector<std::string> args) {
  std::vector<const char*> argv = {"m3i"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return harness::cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("dataset generation is deterministic and balanced") {
  ShapesSpec spec;
  spec.train_size = 400;
  spec.val_size = 100;
  spec.seed = 321;
  const std::string d1 = temp_dir("data_det1");
  const std::string d2 = temp_dir("data_det2");
  harness::generate_shapes_dataset(spec, d1);
  harness::generate_shapes_dataset(spec, d2);
  CHECK(file_bytes(d1 + "/records.bin") == file_bytes(d2 + "/records.bin"));
  CHECK(file_bytes(d1 + "/index.tsv") == file_bytes(d2 + "/index.tsv"));

  Dataset data = harness::load_dataset(d1);
  REQUIRE(data.train.size() == 400);
  REQUIRE(data.val.size() == 100);

  // round-robin class assignment keeps the histogram uniform
  std::vector<int> hist(4, 0);
  for (const auto& s : data.train) hist[static_cast<size_t>(*s.category)]++;
  for (int c = 0; c < 4; ++c)
    CHECK(std::abs(hist[static_cast<size_t>(c)] - 100) <= 8);  // 2% of 400

  // loading reproduces the generator exactly (8-bit quantized pixels)
  core::Sample regen = harness::make_sample(spec, 5);
  CHECK(data.train[5].image.data == regen.image.data);
  CHECK(*data.train[5].category == *regen.category);
}

TEST_CASE("captions follow the template with the fixed vocabulary") {
  ShapesSpec spec;
  spec.seed = 7;
  bool saw_red_circle = false;
  for (int id = 0; id < 64 && !saw_red_circle; id += 4) {  // class 0 = circle
    core::Sample s = harness::make_sample(spec, id);
    REQUIRE(s.caption->size() == 3);
    CHECK((*s.caption)[0] == harness::token_id("a"));
    CHECK(harness::vocabulary()[static_cast<size_t>((*s.caption)[2])] == "circle");
    if ((*s.caption)[1] == harness::token_id("red")) saw_red_circle = true;
  }
  CHECK(saw_red_circle);
}

TEST_CASE("run config parsing: defaults, unknown keys, env override") {
  const std::string dir = temp_dir("cfg");
  {
    std::ofstream f(dir + "/ok.cfg");
    f << "[run]\nmethod = mim_pixel\nbatch_size = 16\n[optimizer]\nlr = 0.002\n";
  }
  RunConfig cfg = harness::run_config_from_file(dir + "/ok.cfg");
  CHECK(cfg.method == "mim_pixel");
  CHECK(cfg.batch_size == 16);
  CHECK(cfg.opt.lr == doctest::Approx(0.002));

  {
    std::ofstream f(dir + "/bad.cfg");
    f << "[run]\nmethod = mim_pixel\nnot_a_key = 5\n";
  }
  CHECK_THROWS_AS(harness::run_config_from_file(dir + "/bad.cfg"), ConfigInvalid);

  {
    std::ofstream f(dir + "/badlr.cfg");
    f << "[optimizer]\nlr = -1\n";
  }
  CHECK_THROWS_AS(harness::run_config_from_file(dir + "/badlr.cfg"), ConfigInvalid);

  setenv("M3I_OUTPUT_DIR", "/tmp/m3i_env_dir", 1);
  RunConfig cfg2 = harness::run_config_from_file(dir + "/ok.cfg");
  CHECK(cfg2.output_dir == "/tmp/m3i_env_dir");
  unsetenv("M3I_OUTPUT_DIR");

  // config text round-trips through the serializer
  RunConfig back = harness::run_config_from_text(harness::run_config_to_text(cfg));
  CHECK(back.method == cfg.method);
  CHECK(back.batch_size == cfg.batch_size);
  CHECK(back.opt.lr == cfg.opt.lr);
}

TEST_CASE("metrics lines round-trip and the schema is enforced") {
  const std::string dir = temp_dir("metrics");
  harness::MetricsRow row;
  row.step = 3;
  row.total = 1.5;
  row.lambda = 2.25;
  row.feature_std = 0.125;
  {
    std::ofstream f(dir + "/log.jsonl");
    f << harness::format_metrics_line(row) << "\n";
  }
  auto rows = harness::parse_metrics_log(dir + "/log.jsonl");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].step == 3);
  CHECK(rows[0].total == 1.5);
  CHECK(rows[0].lambda == 2.25);

  {
    std::ofstream f(dir + "/unknown.jsonl");
    f << R"({"step":0,"total":1,"ssp_i":0,"ssp_j":0,"sp_i":0,"sp_j":0,"lambda":1,)"
      << R"("g_ssp_ema":0,"g_sp_ema":0,"feature_std":0,"effective_rank":1,"lr":0,"extra":9})"
      << "\n";
  }
  CHECK_THROWS_AS(harness::parse_metrics_log(dir + "/unknown.jsonl"), MalformedLog);

  {
    std::ofstream f(dir + "/missing.jsonl");
    f << R"({"step":0,"total":1})" << "\n";
  }
  CHECK_THROWS_AS(harness::parse_metrics_log(dir + "/missing.jsonl"), MalformedLog);
}

TEST_CASE("plots: empty log, corrupt line, and curve counts") {
  const std::string dir = temp_dir("plots");
  {
    std::ofstream f(dir + "/empty.jsonl");
  }
  auto none = harness::emit_plots(dir + "/empty.jsonl", dir + "/out_empty");
  CHECK(none.empty());

  {
    std::ofstream f(dir + "/corrupt.jsonl");
    f << harness::format_metrics_line(harness::MetricsRow{}) << "\n";
    f << "{{{half a line\n";
  }
  try {
    harness::emit_plots(dir + "/corrupt.jsonl", dir + "/out_corrupt");
    FAIL("expected MalformedLog");
  } catch (const MalformedLog& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);  // line number
  }

  // combined-method log: four loss curves plus the lambda curve
  {
    std::ofstream f(dir + "/m3i.jsonl");
    for (int s = 0; s < 5; ++s) {
      harness::MetricsRow r;
      r.step = s;
      r.ssp_i = 1.0 / (s + 1);
      r.ssp_j = 2.0 / (s + 1);
      r.sp_i = 0.5;
      r.sp_j = 0.25;
      r.lambda = 1.0 + s;
      r.total = r.ssp_i + r.ssp_j + r.lambda * (r.sp_i + r.sp_j);
      f << harness::format_metrics_line(r) << "\n";
    }
  }
  auto files = harness::emit_plots(dir + "/m3i.jsonl", dir + "/out_m3i");
  REQUIRE(files.size() == 3);
  const std::string losses = file_bytes(files[0]);
  size_t curves = 0;
  for (size_t pos = losses.find("polyline class=\"curve\""); pos != std::string::npos;
       pos = losses.find("polyline class=\"curve\"", pos + 1))
    ++curves;
  CHECK(curves == 4);
  CHECK(file_bytes(files[1]).find("lambda") != std::string::npos);

  // single-target log: one curve
  {
    std::ofstream f(dir + "/single.jsonl");
    for (int s = 0; s < 5; ++s) {
      harness::MetricsRow r;
      r.step = s;
      r.total = 3.0 / (s + 1);
      f << harness::format_metrics_line(r) << "\n";
    }
  }
  auto files2 = harness::emit_plots(dir + "/single.jsonl", dir + "/out_single");
  const std::string losses2 = file_bytes(files2[0]);
  size_t curves2 = 0;
  for (size_t pos = losses2.find("polyline class=\"curve\""); pos != std::string::npos;
       pos = losses2.find("polyline class=\"curve\"", pos + 1))
    ++curves2;
  CHECK(curves2 == 1);
}

TEST_CASE("two identically seeded runs produce byte-identical metrics") {
  RunConfig a = small_run("mim_pixel", "repro_a");
  RunConfig b = small_run("mim_pixel", "repro_b");
  auto ra = harness::train(a);
  auto rb = harness::train(b);
  CHECK(file_bytes(ra.metrics_path) == file_bytes(rb.metrics_path));
  // checkpoints differ only in the output_dir recorded in the config text;
  // parameters must match exactly
  auto ma = nn::load_checkpoint(ra.checkpoint_path);
  auto mb = nn::load_checkpoint(rb.checkpoint_path);
  REQUIRE(ma.params.size() == mb.params.size());
  for (size_t i = 0; i < ma.params.size(); ++i)
    REQUIRE(ma.params[i].second == mb.params[i].second);
}

TEST_CASE("checkpoint resume reproduces the uninterrupted run exactly") {
  RunConfig full = small_run("m3i", "resume_full");
  full.max_steps = 12;
  auto rfull = harness::train(full);

  RunConfig half = small_run("m3i", "resume_half");
  half.max_steps = 6;
  auto rhalf = harness::train(half);

  RunConfig cont = half;
  cont.max_steps = 12;
  auto rcont = harness::train(cont, rhalf.checkpoint_path);

  CHECK(file_bytes(rcont.metrics_path) == file_bytes(rfull.metrics_path));
  auto ca = nn::load_checkpoint(rfull.checkpoint_path);
  auto cb = nn::load_checkpoint(rcont.checkpoint_path);
  for (size_t i = 0; i < ca.params.size(); ++i)
    REQUIRE(ca.params[i].second == cb.params[i].second);
}

TEST_CASE("an injected NaN aborts with the step index") {
  RunConfig cfg = small_run("mim_pixel", "nan");
  cfg.inject_nan_step = 3;
  try {
    harness::train(cfg);
    FAIL("expected NaNLoss");
  } catch (const NaNLoss& e) {
    CHECK(std::string(e.what()).find("step 3") != std::string::npos);
  }
}

TEST_CASE("probe: shuffled labels score at chance level") {
  Dataset data = harness::load_dataset(small_data_dir());
  // frozen random-encoder features
  registry::MethodConfig mcfg = registry::get_method("image_classification");
  pipeline::ModelConfig mdl;
  mdl.encoder.dim = 32;
  mdl.encoder.depth = 2;
  mdl.encoder.heads = 2;
  mdl.num_classes = data.spec.num_classes;
  pipeline::MethodModel model(mcfg, mdl, 77);

  Eigen::MatrixXd tx = harness::frozen_features(model, data.train);
  Eigen::MatrixXd vx = harness::frozen_features(model, data.val);
  std::vector<int> ty, vy;
  for (const auto& s : data.train) ty.push_back(*s.category);
  for (const auto& s : data.val) vy.push_back(*s.category);

  // deterministic label shuffle destroys the signal
  Rng rng(5);
  std::vector<int> ty_shuf = ty, vy_shuf = vy;
  for (size_t i = ty_shuf.size(); i > 1; --i)
    std::swap(ty_shuf[i - 1], ty_shuf[rng.uniform_int(i)]);
  for (size_t i = vy_shuf.size(); i > 1; --i)
    std::swap(vy_shuf[i - 1], vy_shuf[rng.uniform_int(i)]);
  const double chance =
      harness::linear_probe_accuracy(tx, ty_shuf, vx, vy_shuf, data.spec.num_classes);
  CHECK(chance > 0.05);
  CHECK(chance < 0.50);
}

TEST_CASE("probe: random encoders land in the expected band on the full dataset") {
  ShapesSpec spec;  // canonical 2000/500 split
  Dataset data = harness::build_dataset(spec);
  std::vector<int> ty, vy;
  for (const auto& s : data.train) ty.push_back(*s.category);
  for (const auto& s : data.val) vy.push_back(*s.category);

  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    registry::MethodConfig mcfg = registry::get_method("image_classification");
    pipeline::ModelConfig mdl;  // full-size encoder
    mdl.num_classes = spec.num_classes;
    pipeline::MethodModel model(mcfg, mdl, seed);
    Eigen::MatrixXd tx = harness::frozen_features(model, data.train);
    Eigen::MatrixXd vx = harness::frozen_features(model, data.val);
    const double acc = harness::linear_probe_accuracy(tx, ty, vx, vy, spec.num_classes);
    CAPTURE(seed);
    CHECK(acc >= 0.15);
    CHECK(acc <= 0.45);
  }
}

TEST_CASE("probe: brief supervised training does not fall below the random encoder") {
  RunConfig cfg = small_run("image_classification", "sup_probe");
  cfg.max_steps = 100;
  cfg.epochs = 8;
  auto res = harness::train(cfg);
  Dataset data = harness::load_dataset(small_data_dir());

  auto trained = harness::load_model(res.checkpoint_path);
  const double acc_trained = harness::linear_probe(*trained.model, data);

  pipeline::MethodModel random_model(trained.method, trained.run.model, 4242);
  const double acc_random = harness::linear_probe(random_model, data);
  CAPTURE(acc_trained);
  CAPTURE(acc_random);
  CHECK(acc_trained >= acc_random - 1e-9);
}

TEST_CASE("collapse report: degenerate, whitened, and finite cases") {
  // constant features
  Eigen::MatrixXd constant = Eigen::MatrixXd::Ones(100, 16);
  CHECK(harness::feature_std(constant) == doctest::Approx(0.0));
  CHECK(harness::effective_rank(constant) == doctest::Approx(1.0).epsilon(1e-9));

  // whitened random features at dim 64
  Rng rng(99);
  Eigen::MatrixXd white(500, 64);
  for (long i = 0; i < white.rows(); ++i)
    for (long j = 0; j < white.cols(); ++j) white(i, j) = rng.normal();
  const double er = harness::effective_rank(white);
  CHECK(er >= 55.0);
  CHECK(er <= 64.0);

  // report on a real (random) checkpointed model is finite
  Dataset data = harness::load_dataset(small_data_dir());
  registry::MethodConfig mcfg = registry::get_method("global_distillation");
  pipeline::ModelConfig mdl;
  mdl.encoder.dim = 32;
  mdl.encoder.depth = 2;
  mdl.encoder.heads = 2;
  pipeline::MethodModel model(mcfg, mdl, 13);
  auto rep = harness::collapse_report(model, data);
  CHECK(std::isfinite(rep.feature_std));
  CHECK(std::isfinite(rep.effective_rank));
  CHECK(std::isfinite(rep.boltzmann_entropy));
  CHECK(rep.effective_rank >= 1.0);
  CHECK(rep.effective_rank <= 32.0);
}

TEST_CASE("cli: exit codes for config errors, numeric failures, and success") {
  const std::string dir = temp_dir("cli");
  CHECK(run_cli({"list-methods"}) == 0);
  CHECK(run_cli({"oracle", "--trials", "5", "--seed", "1"}) == 0);

  {
    std::ofstream f(dir + "/bad.cfg");
    f << "[run]\nmethod = not_a_method\ndata_dir = " << small_data_dir() << "\n";
  }
  CHECK(run_cli({"train", "--config", dir + "/bad.cfg"}) == 2);

  {
    std::ofstream f(dir + "/unknown_key.cfg");
    f << "[run]\nwhat = 1\n";
  }
  CHECK(run_cli({"train", "--config", dir + "/unknown_key.cfg"}) == 2);

  {
    std::ofstream f(dir + "/nan.cfg");
    f << "[run]\nmethod = mim_pixel\ndata_dir = " << small_data_dir() << "\noutput_dir = " << dir
      << "/nan_out\nbatch_size = 8\nmax_steps = 4\n[model]\ndim = 32\ndepth = 1\nheads = 2\n"
      << "dec_depth = 1\ndec_heads = 2\n[debug]\ninject_nan_step = 1\n";
  }
  CHECK(run_cli({"train", "--config", dir + "/nan.cfg"}) == 3);

  // gen-data + train + plot round trip through the cli surface
  {
    std::ofstream f(dir + "/data.spec");
    f << "[dataset]\ntrain_size = 96\nval_size = 32\nseed = 5\nout_dir = " << dir << "/data\n";
  }
  CHECK(run_cli({"gen-data", "--spec", dir + "/data.spec"}) == 0);
  {
    std::ofstream f(dir + "/run.cfg");
    f << "[run]\nmethod = mim_pixel\ndata_dir = " << dir << "/data\noutput_dir = " << dir
      << "/out\nbatch_size = 8\nmax_steps = 4\n[model]\ndim = 32\ndepth = 1\nheads = 2\n"
      << "dec_depth = 1\ndec_heads = 2\n";
  }
  CHECK(run_cli({"train", "--config", dir + "/run.cfg"}) == 0);
  CHECK(run_cli({"plot", "--log", dir + "/out/metrics_mim_pixel.jsonl", "--out",
                 dir + "/plots"}) == 0);
  CHECK(run_cli({"eval-probe", "--ckpt", dir + "/out/ckpt_mim_pixel.bin", "--data",
                 dir + "/data"}) == 0);
  CHECK(run_cli({"plot", "--log", dir + "/does_not_exist.jsonl", "--out", dir}) == 2);
}
