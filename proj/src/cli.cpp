// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/harness/cli.hpp"

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "m3i/config_file.hpp"
#include "m3i/error.hpp"
#include "m3i/harness/dataset.hpp"
#include "m3i/harness/evalkit.hpp"
#include "m3i/harness/plots.hpp"
#include "m3i/harness/trainer.hpp"
#include "m3i/oracle/oracle.hpp"
#include "m3i/registry/registry.hpp"

namespace m3i::harness {

namespace {
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"desk-scale mutual-information pre-training lab"};
  app.require_subcommand(1);

  auto* cmd_train = app.add_subcommand("train", "run pre-training from a config file");
  std::string train_config, resume_from;
  uint64_t seed_override = 0;
  bool seed_given = false;
  cmd_train->add_option("--config", train_config, "run configuration file")->required();
  cmd_train->add_option("--seed", seed_override, "override [run] seed")
      ->each([&](const std::string&) { seed_given = true; });
  cmd_train->add_option("--resume", resume_from, "resume from a checkpoint");

  auto* cmd_probe = app.add_subcommand("eval-probe", "linear probe of a frozen checkpoint");
  std::string probe_ckpt, probe_data;
  cmd_probe->add_option("--ckpt", probe_ckpt, "checkpoint file")->required();
  cmd_probe->add_option("--data", probe_data, "dataset directory")->required();

  auto* cmd_oracle = app.add_subcommand("oracle", "run the information-theory check suite");
  uint64_t oracle_seed = 12345;
  int oracle_trials = 100;
  cmd_oracle->add_option("--seed", oracle_seed, "rng seed");
  cmd_oracle->add_option("--trials", oracle_trials, "joints per check");

  auto* cmd_list = app.add_subcommand("list-methods", "print the method catalog");

  auto* cmd_plot = app.add_subcommand("plot", "render SVG plots from a metrics log");
  std::string plot_log, plot_out = ".";
  cmd_plot->add_option("--log", plot_log, "metrics jsonl file")->required();
  cmd_plot->add_option("--out", plot_out, "output directory");

  auto* cmd_gen = app.add_subcommand("gen-data", "generate the synthetic shapes dataset");
  std::string gen_spec, gen_out;
  cmd_gen->add_option("--spec", gen_spec, "dataset spec file")->required();
  cmd_gen->add_option("--out", gen_out, "output directory (defaults to spec out_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (cmd_train->parsed()) {
      RunConfig cfg = run_config_from_file(train_config);
      if (seed_given) cfg.seed = seed_override;
      TrainResult res = train(cfg, resume_from);
      std::cout << "steps " << res.steps << "  final loss " << res.final_loss << "\n"
                << "checkpoint " << res.checkpoint_path << "\n"
                << "metrics " << res.metrics_path << "\n";
      return kExitOk;
    }
    if (cmd_probe->parsed()) {
      const double acc = linear_probe(probe_ckpt, probe_data);
      std::printf("top1 %.4f\n", acc);
      return kExitOk;
    }
    if (cmd_oracle->parsed()) {
      const bool ok = oracle::run_oracle_suite(oracle_seed, oracle_trials, std::cout);
      return ok ? kExitOk : kExitNumeric;
    }
    if (cmd_list->parsed()) {
      std::cout << registry::list_methods_tsv();
      return kExitOk;
    }
    if (cmd_plot->parsed()) {
      auto files = emit_plots(plot_log, plot_out);
      for (const auto& f : files) std::cout << f << "\n";
      return kExitOk;
    }
    if (cmd_gen->parsed()) {
      ShapesSpec spec = shapes_spec_from_file(gen_spec);
      std::string out = gen_out;
      if (out.empty()) {
        ConfigFile cf = ConfigFile::parse_file(gen_spec);
        out = cf.get_str("dataset.out_dir", "");
      }
      if (out.empty()) throw ConfigInvalid("gen-data needs --out or dataset.out_dir");
      generate_shapes_dataset(spec, out);
      std::cout << "dataset written to " << out << "\n";
      return kExitOk;
    }
  } catch (const ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UnknownMethod& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MalformedLog& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NaNLoss& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitConfig;
}

}  // namespace m3i::harness
