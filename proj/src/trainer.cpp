// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/harness/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "m3i/config_file.hpp"
#include "m3i/error.hpp"
#include "m3i/harness/metrics.hpp"
#include "m3i/nn/checkpoint.hpp"
#include "m3i/rng.hpp"

namespace m3i::harness {

namespace fs = std::filesystem;

void RunConfig::check() const {
  if (opt.lr <= 0.0) throw ConfigInvalid("lr must be > 0");
  if (epochs < 1) throw ConfigInvalid("epochs must be >= 1");
  if (batch_size < 2) throw ConfigInvalid("batch_size must be >= 2");
  if (sigma <= 0.0) throw ConfigInvalid("sigma must be > 0");
  if (tau <= 0.0) throw ConfigInvalid("tau must be > 0");
  if (gamma <= 0.0) throw ConfigInvalid("gamma must be > 0");
  if (!(dw_ema > 0.0 && dw_ema < 1.0)) throw ConfigInvalid("dw_ema must lie in (0,1)");
  if (semantic != "category" && semantic != "text")
    throw ConfigInvalid("semantic must be 'category' or 'text'");
}

namespace {

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "run.method", "run.data_dir", "run.output_dir", "run.seed", "run.epochs",
      "run.batch_size", "run.ckpt_every", "run.max_steps",
      "optimizer.lr", "optimizer.beta1", "optimizer.beta2", "optimizer.weight_decay",
      "optimizer.warmup_frac", "optimizer.cosine", "optimizer.lr_batch_base",
      "model.dim", "model.depth", "model.heads", "model.patch_size", "model.resolution",
      "model.mlp_ratio", "model.dec_depth", "model.dec_heads", "model.mask_ratio",
      "model.drop_mode", "model.num_classes",
      "augment.crop_lo", "augment.crop_hi", "augment.flip_prob", "augment.jitter_strength",
      "augment.jitter_prob", "augment.grayscale_prob", "augment.blur_prob",
      "augment.solarize_prob",
      "head.sigma", "head.tau",
      "m3i.layout", "m3i.gamma", "m3i.dw_ema", "m3i.semantic",
      "debug.inject_nan_step"};
  return keys;
}

RunConfig from_config(const ConfigFile& cf) {
  for (const auto& k : cf.keys()) {
    bool ok = false;
    for (const auto& kk : known_keys()) ok = ok || kk == k;
    if (!ok) throw ConfigInvalid("unknown config key '" + k + "'");
  }
  RunConfig c;
  c.method = cf.get_str("run.method", c.method);
  c.data_dir = cf.get_str("run.data_dir", c.data_dir);
  c.output_dir = cf.get_str("run.output_dir", c.output_dir);
  c.seed = static_cast<uint64_t>(cf.get_i64("run.seed", 0));
  c.epochs = static_cast<int>(cf.get_i64("run.epochs", c.epochs));
  c.batch_size = static_cast<int>(cf.get_i64("run.batch_size", c.batch_size));
  c.ckpt_every = static_cast<int>(cf.get_i64("run.ckpt_every", c.ckpt_every));
  c.max_steps = cf.get_i64("run.max_steps", c.max_steps);

  c.opt.lr = cf.get_f64("optimizer.lr", c.opt.lr);
  c.opt.beta1 = cf.get_f64("optimizer.beta1", c.opt.beta1);
  c.opt.beta2 = cf.get_f64("optimizer.beta2", c.opt.beta2);
  c.opt.weight_decay = cf.get_f64("optimizer.weight_decay", c.opt.weight_decay);
  c.warmup_frac = cf.get_f64("optimizer.warmup_frac", c.warmup_frac);
  c.cosine = cf.get_bool("optimizer.cosine", c.cosine);
  c.lr_batch_base = static_cast<int>(cf.get_i64("optimizer.lr_batch_base", c.lr_batch_base));

  c.model.encoder.dim = static_cast<int>(cf.get_i64("model.dim", c.model.encoder.dim));
  c.model.encoder.depth = static_cast<int>(cf.get_i64("model.depth", c.model.encoder.depth));
  c.model.encoder.heads = static_cast<int>(cf.get_i64("model.heads", c.model.encoder.heads));
  c.model.encoder.patch_size =
      static_cast<int>(cf.get_i64("model.patch_size", c.model.encoder.patch_size));
  const int res = static_cast<int>(cf.get_i64("model.resolution", c.model.encoder.view_h));
  c.model.encoder.view_h = c.model.encoder.view_w = res;
  c.model.encoder.mlp_ratio =
      static_cast<int>(cf.get_i64("model.mlp_ratio", c.model.encoder.mlp_ratio));
  c.model.num_classes = static_cast<int>(cf.get_i64("model.num_classes", c.model.num_classes));
  c.model.dec_depth = static_cast<int>(cf.get_i64("model.dec_depth", c.model.dec_depth));
  c.model.dec_heads = static_cast<int>(cf.get_i64("model.dec_heads", c.model.dec_heads));
  c.model.mask_ratio = cf.get_f64("model.mask_ratio", c.model.mask_ratio);
  const std::string dm = cf.get_str("model.drop_mode", "drop");
  if (dm == "drop") c.model.drop_mode = transforms::TokenDropMode::drop;
  else if (dm == "mask_token") c.model.drop_mode = transforms::TokenDropMode::mask_token;
  else throw ConfigInvalid("model.drop_mode must be drop or mask_token");

  c.model.augment.crop_scale_lo = cf.get_f64("augment.crop_lo", c.model.augment.crop_scale_lo);
  c.model.augment.crop_scale_hi = cf.get_f64("augment.crop_hi", c.model.augment.crop_scale_hi);
  c.model.augment.flip_prob = cf.get_f64("augment.flip_prob", c.model.augment.flip_prob);
  c.model.augment.jitter_strength =
      cf.get_f64("augment.jitter_strength", c.model.augment.jitter_strength);
  c.model.augment.jitter_prob = cf.get_f64("augment.jitter_prob", c.model.augment.jitter_prob);
  c.model.augment.grayscale_prob =
      cf.get_f64("augment.grayscale_prob", c.model.augment.grayscale_prob);
  c.model.augment.blur_prob = cf.get_f64("augment.blur_prob", c.model.augment.blur_prob);
  c.model.augment.solarize_prob =
      cf.get_f64("augment.solarize_prob", c.model.augment.solarize_prob);
  c.model.augment.out_h = c.model.augment.out_w = res;

  c.sigma = cf.get_f64("head.sigma", c.sigma);
  c.tau = cf.get_f64("head.tau", c.tau);

  c.layout = objective::layout_from_string(cf.get_str("m3i.layout", "default"));
  c.gamma = cf.get_f64("m3i.gamma", c.gamma);
  c.dw_ema = cf.get_f64("m3i.dw_ema", c.dw_ema);
  c.semantic = cf.get_str("m3i.semantic", c.semantic);

  c.inject_nan_step = cf.get_i64("debug.inject_nan_step", c.inject_nan_step);

  if (const char* env = std::getenv("M3I_OUTPUT_DIR"); env && *env) c.output_dir = env;
  c.check();
  return c;
}

}  // namespace

RunConfig run_config_from_file(const std::string& path) {
  return from_config(ConfigFile::parse_file(path));
}

RunConfig run_config_from_text(const std::string& text) {
  return from_config(ConfigFile::parse_text(text));
}

std::string run_config_to_text(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "[run]\n"
     << "method = " << c.method << "\n"
     << "data_dir = " << c.data_dir << "\n"
     << "output_dir = " << c.output_dir << "\n"
     << "seed = " << c.seed << "\n"
     << "epochs = " << c.epochs << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "ckpt_every = " << c.ckpt_every << "\n"
     << "max_steps = " << c.max_steps << "\n"
     << "[optimizer]\n"
     << "lr = " << c.opt.lr << "\n"
     << "beta1 = " << c.opt.beta1 << "\n"
     << "beta2 = " << c.opt.beta2 << "\n"
     << "weight_decay = " << c.opt.weight_decay << "\n"
     << "warmup_frac = " << c.warmup_frac << "\n"
     << "cosine = " << (c.cosine ? "true" : "false") << "\n"
     << "lr_batch_base = " << c.lr_batch_base << "\n"
     << "[model]\n"
     << "dim = " << c.model.encoder.dim << "\n"
     << "depth = " << c.model.encoder.depth << "\n"
     << "heads = " << c.model.encoder.heads << "\n"
     << "patch_size = " << c.model.encoder.patch_size << "\n"
     << "resolution = " << c.model.encoder.view_h << "\n"
     << "mlp_ratio = " << c.model.encoder.mlp_ratio << "\n"
     << "dec_depth = " << c.model.dec_depth << "\n"
     << "dec_heads = " << c.model.dec_heads << "\n"
     << "mask_ratio = " << c.model.mask_ratio << "\n"
     << "num_classes = " << c.model.num_classes << "\n"
     << "drop_mode = "
     << (c.model.drop_mode == transforms::TokenDropMode::drop ? "drop" : "mask_token") << "\n"
     << "[augment]\n"
     << "crop_lo = " << c.model.augment.crop_scale_lo << "\n"
     << "crop_hi = " << c.model.augment.crop_scale_hi << "\n"
     << "flip_prob = " << c.model.augment.flip_prob << "\n"
     << "jitter_strength = " << c.model.augment.jitter_strength << "\n"
     << "jitter_prob = " << c.model.augment.jitter_prob << "\n"
     << "grayscale_prob = " << c.model.augment.grayscale_prob << "\n"
     << "blur_prob = " << c.model.augment.blur_prob << "\n"
     << "solarize_prob = " << c.model.augment.solarize_prob << "\n"
     << "[head]\n"
     << "sigma = " << c.sigma << "\n"
     << "tau = " << c.tau << "\n"
     << "[m3i]\n"
     << "layout = " << objective::to_string(c.layout) << "\n"
     << "gamma = " << c.gamma << "\n"
     << "dw_ema = " << c.dw_ema << "\n"
     << "semantic = " << c.semantic << "\n"
     << "[debug]\n"
     << "inject_nan_step = " << c.inject_nan_step << "\n";
  return os.str();
}

registry::MethodConfig method_from_run(const RunConfig& cfg) {
  registry::MethodConfig m = registry::get_method(cfg.method);
  m.head.sigma = cfg.sigma;
  m.head.tau = cfg.tau;
  if (m.is_m3i) {
    m.gamma = cfg.gamma;
    m.semantic_target = cfg.semantic == "text" ? registry::TargetTransform::text
                                               : registry::TargetTransform::category;
  }
  return m;
}

namespace {

std::vector<int> epoch_permutation(size_t n, uint64_t seed, int epoch) {
  std::vector<int> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  Rng rng = derive_rng(seed, static_cast<uint64_t>(epoch), 0xD5);
  for (size_t i = n; i > 1; --i) {
    const size_t j = rng.uniform_int(i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

double grad_norm(const Eigen::MatrixXd& g) { return g.norm(); }

struct StepStats {
  double total = 0, ssp_i = 0, ssp_j = 0, sp_i = 0, sp_j = 0;
  Eigen::MatrixXd global_features;
  double g_ssp = 0, g_sp = 0;
};

}  // namespace

TrainResult train(const RunConfig& cfg, const std::string& resume_from) {
  cfg.check();
  registry::MethodConfig mcfg = method_from_run(cfg);
  {
    auto violations = registry::validate_method(mcfg);
    if (!registry::is_valid(violations)) {
      std::string msg = "method '" + mcfg.name + "' failed validation:";
      for (const auto& v : violations) msg += "\n  " + v;
      throw ConfigInvalid(msg);
    }
  }

  Dataset data = load_dataset(cfg.data_dir);
  RunConfig run = cfg;
  run.model.num_classes = data.spec.num_classes;
  run.model.vocab_size = static_cast<int>(vocabulary().size());

  pipeline::MethodModel model(mcfg, run.model, run.seed);
  AdamW opt(model.params(), run.opt);

  const bool m3i = mcfg.is_m3i;
  const int samples_per_step = run.batch_size;
  const int64_t steps_per_epoch =
      static_cast<int64_t>(data.train.size()) / samples_per_step;
  if (steps_per_epoch < 1) throw ConfigInvalid("batch larger than dataset");
  // the lr schedule always spans the configured epochs; max_steps only
  // interrupts the loop early, so a capped run is a prefix of the full one
  const int64_t schedule_steps = steps_per_epoch * run.epochs;
  int64_t total_steps = schedule_steps;
  if (run.max_steps > 0) total_steps = std::min(total_steps, run.max_steps);

  objective::DynamicWeightState dw;
  dw.gamma = run.gamma;
  dw.ema_coeff = run.dw_ema;

  int64_t start_step = 0;
  if (!resume_from.empty()) {
    nn::Checkpoint ck = nn::load_checkpoint(resume_from);
    RunConfig saved = run_config_from_text(ck.method_config_text);
    if (saved.method != run.method) throw IncompatibleCheckpoint("method differs from checkpoint");
    nn::Checkpoint::restore(model.params(), ck.params);
    if (model.uses_momentum()) nn::Checkpoint::restore(model.momentum(), ck.ema_params);
    opt.restore(static_cast<int64_t>(ck.scalars.at("opt_t")), ck.opt_m, ck.opt_v);
    dw.g_ssp_ema = ck.scalars.at("dw_g_ssp");
    dw.g_sp_ema = ck.scalars.at("dw_g_sp");
    dw.initialized = ck.scalars.at("dw_initialized") > 0.5;
    start_step = static_cast<int64_t>(ck.step);
  }

  fs::create_directories(run.output_dir);
  const std::string metrics_path =
      (fs::path(run.output_dir) / ("metrics_" + mcfg.name + ".jsonl")).string();
  const std::string ckpt_path =
      (fs::path(run.output_dir) / ("ckpt_" + mcfg.name + ".bin")).string();
  std::ofstream metrics(metrics_path,
                        start_step == 0 ? std::ios::trunc : std::ios::app);
  if (!metrics) throw DiskWriteError("cannot write " + metrics_path);

  const double lr_batch_scale =
      static_cast<double>(run.batch_size) / std::max(1, run.lr_batch_base);

  auto save_ckpt = [&](int64_t step) {
    nn::Checkpoint ck;
    ck.method_config_text = run_config_to_text(run);
    ck.step = static_cast<uint64_t>(step);
    ck.params = nn::Checkpoint::snapshot(model.params());
    if (model.uses_momentum()) ck.ema_params = nn::Checkpoint::snapshot(model.momentum());
    ck.opt_m = opt.moments_m();
    ck.opt_v = opt.moments_v();
    ck.scalars["opt_t"] = static_cast<double>(opt.t());
    ck.scalars["dw_g_ssp"] = dw.g_ssp_ema;
    ck.scalars["dw_g_sp"] = dw.g_sp_ema;
    ck.scalars["dw_initialized"] = dw.initialized ? 1.0 : 0.0;
    save_checkpoint(ckpt_path, ck);
  };

  double last_total = 0.0;
  for (int64_t step = start_step; step < total_steps; ++step) {
    const int epoch = static_cast<int>(step / steps_per_epoch);
    const int64_t pos = step % steps_per_epoch;
    const auto perm = epoch_permutation(data.train.size(), run.seed, epoch);

    std::vector<core::Sample> batch;
    batch.reserve(static_cast<size_t>(samples_per_step));
    for (int i = 0; i < samples_per_step; ++i)
      batch.push_back(data.train[static_cast<size_t>(
          perm[static_cast<size_t>(pos * samples_per_step + i)])]);

    model.params().zero_grads();
    StepStats stats;
    double lambda_used = 1.0;

    if (!m3i) {
      pipeline::LossOutput out = pipeline::build_single_target_loss(model, batch, run.seed,
                                                                    static_cast<uint64_t>(epoch));
      stats.total = out.total.value()(0, 0);
      stats.global_features = out.global_features;
      if (run.inject_nan_step == step) stats.total = std::nan("");
      if (!std::isfinite(stats.total))
        throw NaNLoss("step " + std::to_string(step) + ": loss is not finite");
      ad::backward(out.total);
    } else {
      if (batch.size() % 2 != 0) throw ConfigInvalid("the combined method needs an even batch");
      std::vector<std::pair<core::Sample, core::Sample>> pairs;
      for (size_t i = 0; i + 1 < batch.size(); i += 2)
        pairs.emplace_back(batch[i], batch[i + 1]);
      objective::M3IBatch mb = objective::build_m3i_batch(
          pairs, run.model.augment, run.model.encoder.grid_h(), run.model.encoder.grid_w(),
          run.model.mask_ratio, run.model.encoder.patch_size, run.layout,
          hash_combine(hash_combine(run.seed, static_cast<uint64_t>(epoch)),
                       static_cast<uint64_t>(pos)));
      lambda_used = dw.initialized ? dw.lambda() : dw.gamma;
      objective::M3ILossOutput out =
          objective::compute_m3i_loss(model, mb, lambda_used, /*cut_encoder_boundary=*/true);
      stats.ssp_i = out.ssp_i;
      stats.ssp_j = out.ssp_j;
      stats.sp_i = out.sp_i;
      stats.sp_j = out.sp_j;
      stats.total = out.total.value()(0, 0);
      stats.global_features = out.global_features;
      if (run.inject_nan_step == step) stats.total = std::nan("");
      if (!std::isfinite(stats.total))
        throw NaNLoss("step " + std::to_string(step) + ": loss is not finite");

      // branch gradients measured at the encoder output
      ad::backward(out.ssp_sum);
      Eigen::MatrixXd g_ssp = out.boundary.grad();
      ad::backward(out.sp_sum);
      Eigen::MatrixXd g_sp = out.boundary.grad();
      stats.g_ssp = grad_norm(g_ssp);
      stats.g_sp = grad_norm(g_sp);
      // semantic-branch parameter gradients carry the loss weight
      for (const auto& prefix : model.semantic_prefixes())
        for (auto& [name, var] : model.params().filtered(prefix).items())
          var.node()->grad *= lambda_used;
      // encoder backward with the combined branch gradient
      ad::backward(out.encoded.tokens, g_ssp + lambda_used * g_sp);
      dw = objective::update_dynamic_weight(dw, stats.g_ssp, stats.g_sp);
    }

    opt.step(model.params(), lr_schedule(step, schedule_steps, run.warmup_frac, run.cosine) *
                                 lr_batch_scale);
    model.momentum_update();
    last_total = stats.total;

    MetricsRow row;
    row.step = step;
    row.total = stats.total;
    row.ssp_i = stats.ssp_i;
    row.ssp_j = stats.ssp_j;
    row.sp_i = stats.sp_i;
    row.sp_j = stats.sp_j;
    row.lambda = m3i ? lambda_used : 1.0;
    row.g_ssp_ema = dw.g_ssp_ema;
    row.g_sp_ema = dw.g_sp_ema;
    row.feature_std = feature_std(stats.global_features);
    row.effective_rank = effective_rank(stats.global_features);
    row.lr = run.opt.lr * lr_schedule(step, schedule_steps, run.warmup_frac, run.cosine) *
             lr_batch_scale;
    metrics << format_metrics_line(row) << "\n";

    if (run.ckpt_every > 0 && (step + 1) % run.ckpt_every == 0 && step + 1 < total_steps)
      save_ckpt(step + 1);
  }
  metrics.flush();
  save_ckpt(total_steps);

  return TrainResult{ckpt_path, metrics_path, total_steps, last_total};
}

LoadedModel load_model(const std::string& ckpt_path) {
  nn::Checkpoint ck = nn::load_checkpoint(ckpt_path);
  LoadedModel out;
  out.run = run_config_from_text(ck.method_config_text);
  out.method = method_from_run(out.run);
  out.run.model.vocab_size = static_cast<int>(vocabulary().size());
  out.model = std::make_unique<pipeline::MethodModel>(out.method, out.run.model, out.run.seed);
  nn::Checkpoint::restore(out.model->params(), ck.params);
  if (out.model->uses_momentum()) nn::Checkpoint::restore(out.model->momentum(), ck.ema_params);
  out.step = ck.step;
  return out;
}

}  // namespace m3i::harness
