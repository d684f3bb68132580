// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/pipeline/pipeline.hpp"

#include "m3i/error.hpp"
#include "m3i/rng.hpp"

namespace m3i::pipeline {

using ad::Var;
using core::ReprKind;
using core::Representation;
using heads::Family;
using heads::Mechanism;
using registry::InputTransform;
using registry::MethodConfig;
using registry::TargetTransform;

namespace {
constexpr uint64_t kPurposeView1 = 1;
constexpr uint64_t kPurposeView2 = 2;
constexpr uint64_t kPurposeMask = 3;
}  // namespace

MethodModel::MethodModel(const MethodConfig& mcfg, const ModelConfig& mdl, uint64_t seed)
    : mcfg_(mcfg), mdl_(mdl) {
  const int dim = mdl_.encoder.dim;
  encoder_ = std::make_unique<nn::VisionEncoder>(mdl_.encoder, "encoder/");
  encoder_->register_params(params_, seed);

  const bool dense_target = core::is_dense(mcfg_.target_repr) || mcfg_.is_m3i;
  if (dense_target) {
    nn::DecoderConfig dc;
    dc.depth = mdl_.dec_depth;
    dc.heads = mdl_.dec_heads;
    dc.dim = dim;
    dc.in_dim = dim;
    dc.out_dim = mcfg_.target_repr == ReprKind::dense_pixels && !mcfg_.is_m3i
                     ? mdl_.encoder.patch_size * mdl_.encoder.patch_size * mdl_.encoder.channels
                     : dim;
    dec_img_ = std::make_unique<nn::DenseDecoder>(dc, "dec_img/");
    dec_img_->register_params(params_, seed);
  }
  if (mcfg_.target_repr == ReprKind::global_feature) {
    pool_glob_ = std::make_unique<nn::AttentionPool>(dim, mdl_.dec_heads, dim, "pool_glob/");
    pool_glob_->register_params(params_, seed);
    nn::register_global_proj(params_, dim, seed);
  }
  const bool semantic = mcfg_.is_m3i || mcfg_.target_transform == TargetTransform::category ||
                        mcfg_.target_transform == TargetTransform::text;
  if (semantic) {
    pool_sem_ = std::make_unique<nn::AttentionPool>(dim, mdl_.dec_heads, dim, "pool_sem/");
    pool_sem_->register_params(params_, seed);
    const TargetTransform sem =
        mcfg_.is_m3i ? mcfg_.semantic_target : mcfg_.target_transform;
    if (sem == TargetTransform::category) {
      cats_ = std::make_unique<nn::CategoryTable>(mdl_.num_classes, dim, "cat/");
      cats_->register_params(params_, seed);
    } else if (sem == TargetTransform::text) {
      if (mdl_.vocab_size <= 0) throw ConfigInvalid("text target needs a vocabulary size");
      text_ = std::make_unique<nn::TextEncoder>(mdl_.vocab_size, dim, mdl_.text_depth,
                                                mdl_.dec_heads, dim, "text/");
      text_->register_params(params_, seed);
    }
  }

  uses_momentum_ = mcfg_.target_encoder.kind == nn::TargetKind::momentum || mcfg_.is_m3i;
  if (uses_momentum_) momentum_ = params_.filtered("encoder/").clone_detached();
}

void MethodModel::momentum_update() {
  if (!uses_momentum_) return;
  heads::ema_update(momentum_, params_.filtered("encoder/"), mcfg_.regularizer.ema_coeff);
}

void MethodModel::reset_momentum_to_online() {
  if (!uses_momentum_) return;
  heads::ema_update(momentum_, params_.filtered("encoder/"), 0.0);
}

std::vector<std::string> MethodModel::semantic_prefixes() const {
  std::vector<std::string> out;
  if (pool_sem_) out.push_back("pool_sem/");
  if (cats_) out.push_back("cat/");
  if (text_) out.push_back("text/");
  return out;
}

core::TransformDescriptor identity_descriptor(const core::Sample& s, int out_h, int out_w) {
  core::TransformDescriptor d;
  d.kind = core::TransformKind::identity_view;
  d.crop_box = {0, 0, s.image.h, s.image.w};
  d.out_h = out_h;
  d.out_w = out_w;
  return d;
}

SampleViews build_views(const core::Sample& sample, const MethodConfig& mcfg,
                        const ModelConfig& mdl, uint64_t run_seed, uint64_t epoch) {
  SampleViews v;
  const uint64_t sid = static_cast<uint64_t>(sample.id);
  v.target_view = transforms::sample_augmentation(
      sample, mdl.augment, hash_combine(hash_combine(run_seed, sid), hash_combine(epoch, kPurposeView1)));
  if (registry::is_intra_view(mcfg.input_transform)) {
    v.input_view = v.target_view;
  } else {
    v.input_view = transforms::sample_augmentation(
        sample, mdl.augment, hash_combine(hash_combine(run_seed, sid), hash_combine(epoch, kPurposeView2)));
  }
  if (registry::is_masked(mcfg.input_transform)) {
    v.input_view.descriptor.kind = core::TransformKind::augment_masked;
    v.mask = transforms::generate_blockwise_mask(
        mdl.encoder.grid_h(), mdl.encoder.grid_w(), mdl.mask_ratio, mdl.encoder.patch_size,
        hash_combine(hash_combine(run_seed, sid), hash_combine(epoch, kPurposeMask)));
  }
  return v;
}

namespace {

// Dense target rows for every sample, stacked in full-grid order.
Var dense_targets(MethodModel& model, const std::vector<core::ViewRecord>& target_views) {
  const MethodConfig& mcfg = model.method();
  const auto& enc = model.encoder();
  if (mcfg.target_repr == ReprKind::dense_pixels) {
    const int p = enc.config().patch_size;
    Eigen::MatrixXd all(static_cast<long>(target_views.size()) * enc.config().tokens(),
                        p * p * enc.config().channels);
    for (size_t b = 0; b < target_views.size(); ++b)
      all.middleRows(static_cast<long>(b) * enc.config().tokens(), enc.config().tokens()) =
          nn::patchify(target_views[b].pixels, p);
    return ad::constant(std::move(all));
  }
  const nn::ParamStore& run = mcfg.target_encoder.kind == nn::TargetKind::momentum
                                  ? model.momentum()
                                  : model.params();
  std::vector<const core::Image*> imgs;
  imgs.reserve(target_views.size());
  for (const auto& tv : target_views) imgs.push_back(&tv.pixels);
  nn::EncodedBatch eb = enc.forward(run, imgs);
  return eb.tokens;
}

// Per-sample mean of dense target rows, projected to the global target.
Var global_targets(MethodModel& model, const Var& dense_rows, int batch, int n) {
  std::vector<Var> means;
  means.reserve(static_cast<size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    std::vector<int> rows(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) rows[static_cast<size_t>(i)] = b * n + i;
    means.push_back(ad::mean_rows(ad::gather_rows(dense_rows, rows)));
  }
  Var m = means.size() == 1 ? means[0] : ad::concat_rows(means);
  return ad::add_rowvec(ad::matmul(m, model.params().get("target_global/W")),
                        model.params().get("target_global/b"));
}

bool targets_detached(Mechanism m) {
  return m == Mechanism::stop_gradient || m == Mechanism::ema_target;
}

}  // namespace

LossOutput build_single_target_loss(MethodModel& model, const std::vector<core::Sample>& batch,
                                    uint64_t run_seed, uint64_t epoch) {
  const MethodConfig& mcfg = model.method();
  const ModelConfig& mdl = model.model_config();
  registry::validate_batch(batch, mcfg, mdl.encoder.patch_size);

  const int B = static_cast<int>(batch.size());
  const int N = mdl.encoder.tokens();

  std::vector<SampleViews> views;
  views.reserve(batch.size());
  for (const auto& s : batch) views.push_back(build_views(s, mcfg, mdl, run_seed, epoch));

  // online encoder on the input views
  std::vector<const core::Image*> inputs;
  std::vector<const transforms::MaskPattern*> masks;
  for (const auto& v : views) {
    inputs.push_back(&v.input_view.pixels);
    masks.push_back(v.mask ? &*v.mask : nullptr);
  }
  nn::EncodedBatch enc = registry::is_masked(mcfg.input_transform)
                             ? model.encoder().forward_masked(model.params(), inputs, masks,
                                                              mdl.drop_mode)
                             : model.encoder().forward(model.params(), inputs);
  const int Nk = enc.tokens_per_sample;

  LossOutput out;
  out.encoded = enc;
  out.global_features.resize(B, mdl.encoder.dim);
  for (int b = 0; b < B; ++b)
    out.global_features.row(b) =
        enc.tokens.value().middleRows(static_cast<long>(b) * Nk, Nk).colwise().mean();

  Var loss;
  const bool intra = registry::is_intra_view(mcfg.input_transform);

  if (core::is_dense(mcfg.target_repr) || mcfg.target_repr == ReprKind::global_feature) {
    std::vector<core::ViewRecord> target_views;
    target_views.reserve(views.size());
    for (const auto& v : views) target_views.push_back(v.target_view);
    Var tgt_dense = dense_targets(model, target_views);

    if (core::is_dense(mcfg.target_repr)) {
      // dense decode aligned to the target grid
      std::vector<nn::DenseDecodeItem> items(static_cast<size_t>(B));
      for (int b = 0; b < B; ++b) {
        nn::DenseDecodeItem& it = items[static_cast<size_t>(b)];
        it.seed_from.assign(static_cast<size_t>(N), -1);
        if (intra) {
          const auto& kept = enc.grid_indices[static_cast<size_t>(b)];
          for (size_t i = 0; i < kept.size(); ++i)
            it.seed_from[static_cast<size_t>(kept[i])] = b * Nk + static_cast<int>(i);
          it.target_coords.reserve(static_cast<size_t>(N));
          for (const auto& c : nn::grid_coords(mdl.encoder.grid_h(), mdl.encoder.grid_w()))
            it.target_coords.push_back(c);
        } else {
          const auto in_geom = nn::ViewGeometry::of(views[static_cast<size_t>(b)].input_view.descriptor,
                                                    mdl.encoder.patch_size);
          const auto tg_geom = nn::ViewGeometry::of(views[static_cast<size_t>(b)].target_view.descriptor,
                                                    mdl.encoder.patch_size);
          it.target_coords = nn::map_grid_to_input_frame(in_geom, tg_geom);
          it.context_rows.resize(static_cast<size_t>(Nk));
          for (int i = 0; i < Nk; ++i) it.context_rows[static_cast<size_t>(i)] = b * Nk + i;
        }
      }
      Var pred = model.image_decoder().decode(model.params(), enc.tokens, items);

      // positions the loss reads
      std::vector<int> rows;
      for (int b = 0; b < B; ++b) {
        if (intra && mcfg.loss_on_masked_only && views[static_cast<size_t>(b)].mask) {
          for (int g : views[static_cast<size_t>(b)].mask->masked_indices()) rows.push_back(b * N + g);
        } else {
          for (int g = 0; g < N; ++g) rows.push_back(b * N + g);
        }
      }
      Var pred_rows = ad::gather_rows(pred, rows);
      Var tgt_rows = ad::gather_rows(tgt_dense, rows);
      if (targets_detached(mcfg.regularizer.mechanism)) tgt_rows = ad::detach(tgt_rows);

      if (mcfg.head.family == Family::gaussian) {
        loss = heads::gaussian_nll(Representation(mcfg.target_repr, tgt_rows),
                                   Representation(mcfg.target_repr, pred_rows), mcfg.head.sigma);
      } else {
        // in-batch + in-grid negatives: every target row is a candidate
        std::vector<int> pos(rows.size());
        for (size_t i = 0; i < rows.size(); ++i) pos[i] = rows[static_cast<size_t>(i)];
        Var all_tgt = targets_detached(mcfg.regularizer.mechanism) ? ad::detach(tgt_dense) : tgt_dense;
        loss = heads::boltzmann_nll_batch(pred_rows, all_tgt, pos, mcfg.head.tau,
                                          mcfg.head.normalize_embeddings);
      }
    } else {
      // global feature target
      Var tgt_glob = global_targets(model, tgt_dense, B, N);
      std::vector<std::vector<int>> row_sets(static_cast<size_t>(B));
      for (int b = 0; b < B; ++b) {
        row_sets[static_cast<size_t>(b)].resize(static_cast<size_t>(Nk));
        for (int i = 0; i < Nk; ++i) row_sets[static_cast<size_t>(b)][static_cast<size_t>(i)] = b * Nk + i;
      }
      Var pred = model.global_pool().pool(model.params(), enc.tokens, row_sets);

      Var tgt_used = targets_detached(mcfg.regularizer.mechanism) ? ad::detach(tgt_glob) : tgt_glob;
      if (mcfg.head.family == Family::gaussian) {
        loss = heads::gaussian_nll(Representation(ReprKind::global_feature, tgt_used),
                                   Representation(ReprKind::global_feature, pred), mcfg.head.sigma);
      } else if (mcfg.regularizer.mechanism == Mechanism::negatives) {
        std::vector<int> pos(static_cast<size_t>(B));
        for (int b = 0; b < B; ++b) pos[static_cast<size_t>(b)] = b;
        loss = heads::boltzmann_nll_batch(pred, tgt_used, pos, mcfg.head.tau,
                                          mcfg.head.normalize_embeddings);
      } else {
        // no candidate set: prototype softmax over feature components
        loss = heads::boltzmann_soft_nll(pred, tgt_used, mcfg.head.tau);
      }
      if (mcfg.regularizer.mechanism == Mechanism::decorrelation) {
        Var penalty = heads::decorrelation_penalty(tgt_glob);
        loss = ad::add(loss, ad::scalar_mul(penalty, mcfg.regularizer.decorrelation_weight));
      }
    }
  } else {
    // semantic target: category or text
    std::vector<std::vector<int>> row_sets(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b) {
      row_sets[static_cast<size_t>(b)].resize(static_cast<size_t>(Nk));
      for (int i = 0; i < Nk; ++i) row_sets[static_cast<size_t>(b)][static_cast<size_t>(i)] = b * Nk + i;
    }
    Var pred = model.semantic_pool().pool(model.params(), enc.tokens, row_sets);
    if (mcfg.target_transform == TargetTransform::category) {
      std::vector<int> labels;
      labels.reserve(batch.size());
      for (const auto& s : batch) labels.push_back(*s.category);
      loss = heads::boltzmann_nll_batch(pred, model.categories().table(model.params()), labels,
                                        mcfg.head.tau, mcfg.head.normalize_embeddings,
                                        mcfg.label_smoothing);
    } else {
      std::vector<std::vector<int>> captions;
      captions.reserve(batch.size());
      for (const auto& s : batch) captions.push_back(*s.caption);
      Var txt = model.text_encoder().forward(model.params(), captions);
      std::vector<int> pos(static_cast<size_t>(B));
      for (int b = 0; b < B; ++b) pos[static_cast<size_t>(b)] = b;
      loss = heads::boltzmann_nll_batch(pred, txt, pos, mcfg.head.tau,
                                        mcfg.head.normalize_embeddings, mcfg.label_smoothing);
    }
  }

  out.total = loss;
  out.terms.emplace_back("loss", loss.value()(0, 0));
  return out;
}

Eigen::MatrixXd extract_global_features(const MethodModel& model,
                                        const std::vector<core::Sample>& batch) {
  const auto& cfg = model.encoder().config();
  std::vector<core::ViewRecord> recs;
  recs.reserve(batch.size());
  std::vector<const core::Image*> imgs;
  for (const auto& s : batch) {
    recs.push_back(core::replay_transform(s, identity_descriptor(s, cfg.view_h, cfg.view_w)));
  }
  for (const auto& r : recs) imgs.push_back(&r.pixels);
  nn::EncodedBatch enc = model.encoder().forward(model.params(), imgs);
  const int B = static_cast<int>(batch.size());
  Eigen::MatrixXd out(B, cfg.dim);
  for (int b = 0; b < B; ++b)
    out.row(b) = enc.tokens.value()
                     .middleRows(static_cast<long>(b) * enc.tokens_per_sample, enc.tokens_per_sample)
                     .colwise()
                     .mean();
  return out;
}

}  // namespace m3i::pipeline
