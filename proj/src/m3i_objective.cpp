// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/objective/m3i_objective.hpp"

#include <cmath>

#include "m3i/error.hpp"
#include "m3i/rng.hpp"

namespace m3i::objective {

using ad::Var;
using core::ReprKind;
using core::Representation;
using heads::Family;
using registry::TargetTransform;

TargetViewLayout layout_from_string(const std::string& s) {
  if (s == "default") return TargetViewLayout::layout_default;
  if (s == "a") return TargetViewLayout::layout_a;
  if (s == "b") return TargetViewLayout::layout_b;
  if (s == "c") return TargetViewLayout::layout_c;
  throw ConfigInvalid("unknown target-view layout '" + s + "'");
}

const char* to_string(TargetViewLayout l) {
  switch (l) {
    case TargetViewLayout::layout_default: return "default";
    case TargetViewLayout::layout_a: return "a";
    case TargetViewLayout::layout_b: return "b";
    case TargetViewLayout::layout_c: return "c";
  }
  return "?";
}

namespace {
// first/second target view equals its input view?
std::pair<bool, bool> layout_same_flags(TargetViewLayout l) {
  switch (l) {
    case TargetViewLayout::layout_default: return {true, false};
    case TargetViewLayout::layout_a: return {true, true};
    case TargetViewLayout::layout_b: return {false, false};
    case TargetViewLayout::layout_c: return {false, true};
  }
  return {true, false};
}
}  // namespace

M3IBatch build_m3i_batch(const std::vector<std::pair<core::Sample, core::Sample>>& pairs,
                         const transforms::AugmentSpec& spec, int grid_h, int grid_w,
                         double mask_ratio, int patch_size, TargetViewLayout layout,
                         uint64_t rng_seed) {
  M3IBatch out;
  out.layout = layout;
  const auto [first_same, second_same] = layout_same_flags(layout);
  out.pairs.reserve(pairs.size());
  for (size_t k = 0; k < pairs.size(); ++k) {
    const auto& [si, sj] = pairs[k];
    if (si.id == sj.id)
      throw SamePairedSample("pair " + std::to_string(k) + " repeats sample " +
                             std::to_string(si.id));
    M3IPair p;
    p.sample_i = si;
    p.sample_j = sj;
    const uint64_t base = hash_combine(rng_seed, k);
    p.input_view_i = transforms::sample_augmentation(si, spec, hash_combine(base, 1));
    p.input_view_j = transforms::sample_augmentation(sj, spec, hash_combine(base, 2));
    p.target_view_i =
        first_same ? p.input_view_i
                   : transforms::sample_augmentation(si, spec, hash_combine(base, 3));
    p.target_view_j =
        second_same ? p.input_view_j
                    : transforms::sample_augmentation(sj, spec, hash_combine(base, 4));
    p.mask = transforms::generate_blockwise_mask(grid_h, grid_w, mask_ratio, patch_size,
                                                 hash_combine(base, 5));
    p.mixed_input = transforms::mix_views(p.input_view_i, p.input_view_j, p.mask);
    out.pairs.push_back(std::move(p));
  }
  return out;
}

double DynamicWeightState::lambda() const {
  return gamma * g_ssp_ema / std::max(g_sp_ema, 1e-12);
}

DynamicWeightState update_dynamic_weight(const DynamicWeightState& state, double grad_ssp_norm,
                                         double grad_sp_norm) {
  if (grad_ssp_norm < 0.0 || grad_sp_norm < 0.0)
    throw Error("gradient norms must be non-negative");
  DynamicWeightState next = state;
  if (!state.initialized) {
    next.g_ssp_ema = grad_ssp_norm;
    next.g_sp_ema = grad_sp_norm;
    next.initialized = true;
  } else {
    next.g_ssp_ema = state.ema_coeff * state.g_ssp_ema + (1.0 - state.ema_coeff) * grad_ssp_norm;
    next.g_sp_ema = state.ema_coeff * state.g_sp_ema + (1.0 - state.ema_coeff) * grad_sp_norm;
  }
  return next;
}

std::vector<Var> grouped_loss(const std::vector<core::TargetGroupSpec>& groups,
                              const std::map<int, TargetItem>& items) {
  std::vector<int> ids;
  ids.reserve(items.size());
  for (const auto& [id, item] : items) ids.push_back(id);
  core::check_partition(groups, ids);

  std::vector<Var> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    Var acc;
    for (int id : g.member_targets) {
      const TargetItem& it = items.at(id);
      Var nll = it.head.family == Family::gaussian
                    ? heads::gaussian_nll(it.target, it.prediction, it.head.sigma)
                    : heads::boltzmann_nll(it.prediction, it.target, it.negatives, it.head.tau,
                                           it.head.normalize_embeddings);
      acc = acc.defined() ? ad::add(acc, nll) : nll;
    }
    if (!acc.defined()) acc = ad::scalar(0.0);
    out.push_back(acc);
  }
  return out;
}

M3ILossOutput compute_m3i_loss(pipeline::MethodModel& model, const M3IBatch& batch, double lambda,
                               bool cut_encoder_boundary) {
  const registry::MethodConfig& mcfg = model.method();
  if (!mcfg.is_m3i) throw ConfigInvalid("compute_m3i_loss needs the combined method config");
  {
    auto violations = registry::validate_method(mcfg);
    if (!registry::is_valid(violations)) throw ConfigInvalid("method config failed validation");
  }
  if (batch.pairs.empty()) throw ShapeMismatch("empty batch");

  const auto& mdl = model.model_config();
  const int B = static_cast<int>(batch.pairs.size());
  const int N = mdl.encoder.tokens();
  const int p = mdl.encoder.patch_size;

  // online encoder over the mixed inputs (full grid)
  std::vector<const core::Image*> mixed;
  mixed.reserve(batch.pairs.size());
  for (const auto& pr : batch.pairs) mixed.push_back(&pr.mixed_input);
  nn::EncodedBatch enc = model.encoder().forward(model.params(), mixed);

  M3ILossOutput out;
  out.encoded = enc;
  out.global_features.resize(B, mdl.encoder.dim);
  for (int b = 0; b < B; ++b)
    out.global_features.row(b) =
        enc.tokens.value().middleRows(static_cast<long>(b) * N, N).colwise().mean();

  // Branch losses read this node; with the cut it is a leaf so per-branch
  // gradients can be measured before the encoder backward.
  Var feat = cut_encoder_boundary ? ad::leaf(enc.tokens.value(), true) : enc.tokens;
  out.boundary = cut_encoder_boundary ? feat : Var();

  // momentum targets for both target views
  std::vector<const core::Image*> tviews;
  tviews.reserve(batch.pairs.size() * 2);
  for (const auto& pr : batch.pairs) tviews.push_back(&pr.target_view_i.pixels);
  for (const auto& pr : batch.pairs) tviews.push_back(&pr.target_view_j.pixels);
  nn::EncodedBatch tgt = model.encoder().forward(model.momentum(), tviews);

  const auto [first_same, second_same] = layout_same_flags(batch.layout);

  // dense decode per image role; image i is supervised at mask==1 cells of
  // its own (first) target view, image j at mask==0 cells of the second
  auto decode_role = [&](bool image_i, bool same_view) -> std::pair<Var, std::vector<int>> {
    std::vector<nn::DenseDecodeItem> items(static_cast<size_t>(B));
    std::vector<int> loss_rows;
    for (int b = 0; b < B; ++b) {
      const M3IPair& pr = batch.pairs[static_cast<size_t>(b)];
      nn::DenseDecodeItem& it = items[static_cast<size_t>(b)];
      const auto own_cells = image_i ? pr.mask.visible_indices() : pr.mask.masked_indices();
      it.seed_from.assign(static_cast<size_t>(N), -1);
      const auto& in_desc = image_i ? pr.input_view_i.descriptor : pr.input_view_j.descriptor;
      const auto& tg_desc = image_i ? pr.target_view_i.descriptor : pr.target_view_j.descriptor;
      if (same_view) {
        for (int g : own_cells) it.seed_from[static_cast<size_t>(g)] = b * N + g;
        it.target_coords.reserve(static_cast<size_t>(N));
        for (const auto& c : nn::grid_coords(mdl.encoder.grid_h(), mdl.encoder.grid_w()))
          it.target_coords.push_back(c);
      } else {
        const auto in_geom = nn::ViewGeometry::of(in_desc, p);
        const auto tg_geom = nn::ViewGeometry::of(tg_desc, p);
        it.target_coords = nn::map_grid_to_input_frame(in_geom, tg_geom);
        it.context_rows.reserve(own_cells.size());
        for (int g : own_cells) it.context_rows.push_back(b * N + g);
      }
      for (int g : own_cells) loss_rows.push_back(b * N + g);
    }
    Var pred = model.image_decoder().decode(model.params(), feat, items);
    return {pred, loss_rows};
  };

  auto [pred_i, rows_i] = decode_role(true, first_same);
  auto [pred_j, rows_j] = decode_role(false, second_same);

  // target rows: first B blocks hold target_view_i, next B target_view_j
  auto tgt_rows_for = [&](const std::vector<int>& rows, bool image_i) {
    std::vector<int> shifted;
    shifted.reserve(rows.size());
    for (int r : rows) shifted.push_back(image_i ? r : B * N + r);
    return ad::detach(ad::gather_rows(tgt.tokens, shifted));
  };

  Var ssp_i = heads::gaussian_nll(
      Representation(ReprKind::dense_feature, tgt_rows_for(rows_i, true)),
      Representation(ReprKind::dense_feature, ad::gather_rows(pred_i, rows_i)), mcfg.head.sigma);
  Var ssp_j = heads::gaussian_nll(
      Representation(ReprKind::dense_feature, tgt_rows_for(rows_j, false)),
      Representation(ReprKind::dense_feature, ad::gather_rows(pred_j, rows_j)), mcfg.head.sigma);

  // semantic predictions pool each image's own cells of the mixed input
  std::vector<std::vector<int>> sets_i(static_cast<size_t>(B)), sets_j(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    for (int g : batch.pairs[static_cast<size_t>(b)].mask.visible_indices())
      sets_i[static_cast<size_t>(b)].push_back(b * N + g);
    for (int g : batch.pairs[static_cast<size_t>(b)].mask.masked_indices())
      sets_j[static_cast<size_t>(b)].push_back(b * N + g);
  }
  Var sem_i = model.semantic_pool().pool(model.params(), feat, sets_i);
  Var sem_j = model.semantic_pool().pool(model.params(), feat, sets_j);

  Var sp_i, sp_j;
  if (mcfg.semantic_target == TargetTransform::category) {
    std::vector<int> labels_i, labels_j;
    for (const auto& pr : batch.pairs) {
      if (!pr.sample_i.category || !pr.sample_j.category)
        throw MissingTargetField("combined method needs categories");
      labels_i.push_back(*pr.sample_i.category);
      labels_j.push_back(*pr.sample_j.category);
    }
    Var table = model.categories().table(model.params());
    sp_i = heads::boltzmann_nll_batch(sem_i, table, labels_i, mcfg.head.tau, false,
                                      mcfg.label_smoothing);
    sp_j = heads::boltzmann_nll_batch(sem_j, table, labels_j, mcfg.head.tau, false,
                                      mcfg.label_smoothing);
  } else {
    std::vector<std::vector<int>> caps;
    caps.reserve(batch.pairs.size() * 2);
    for (const auto& pr : batch.pairs) {
      if (!pr.sample_i.caption || !pr.sample_j.caption)
        throw MissingTargetField("combined method needs captions");
      caps.push_back(*pr.sample_i.caption);
    }
    for (const auto& pr : batch.pairs) caps.push_back(*pr.sample_j.caption);
    Var txt = model.text_encoder().forward(model.params(), caps);
    std::vector<int> pos_i(static_cast<size_t>(B)), pos_j(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b) {
      pos_i[static_cast<size_t>(b)] = b;
      pos_j[static_cast<size_t>(b)] = B + b;
    }
    sp_i = heads::boltzmann_nll_batch(sem_i, txt, pos_i, mcfg.head.tau, true, mcfg.label_smoothing);
    sp_j = heads::boltzmann_nll_batch(sem_j, txt, pos_j, mcfg.head.tau, true, mcfg.label_smoothing);
  }

  // the four groups partition the target set {0: I_y_i, 1: I_y_j, 2: T_i, 3: T_j}
  std::vector<core::TargetGroupSpec> groups = {
      {0, {0}, "gaussian_dense", core::LossWeightRole::ssp},
      {1, {1}, "gaussian_dense", core::LossWeightRole::ssp},
      {2, {2}, "boltzmann_semantic", core::LossWeightRole::sp},
      {3, {3}, "boltzmann_semantic", core::LossWeightRole::sp},
  };
  core::check_partition(groups, {0, 1, 2, 3});

  out.ssp_i = ssp_i.value()(0, 0);
  out.ssp_j = ssp_j.value()(0, 0);
  out.sp_i = sp_i.value()(0, 0);
  out.sp_j = sp_j.value()(0, 0);
  out.ssp_sum = ad::add(ssp_i, ssp_j);
  out.sp_sum = ad::add(sp_i, sp_j);
  out.total = ad::add(out.ssp_sum, ad::scalar_mul(out.sp_sum, lambda));
  return out;
}

}  // namespace m3i::objective
