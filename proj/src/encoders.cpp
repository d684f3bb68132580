// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/nn/encoders.hpp"

#include "m3i/error.hpp"

#include <cmath>

namespace m3i::nn {

using ad::Var;

// position embeddings are damped so patch content dominates the tokens
constexpr double kPosEmbedScale = 0.25;

void EncoderConfig::check() const {
  if (view_h % patch_size != 0 || view_w % patch_size != 0)
    throw ShapeMismatch("view resolution not divisible by patch size");
  if (dim % heads != 0) throw ShapeMismatch("dim not divisible by heads");
  if (dim % 4 != 0) throw ShapeMismatch("dim must be divisible by 4 for position embeddings");
}

const char* to_string(TargetKind k) {
  switch (k) {
    case TargetKind::identity_pixels: return "identity_pixels";
    case TargetKind::shared: return "shared";
    case TargetKind::momentum: return "momentum";
    case TargetKind::category_table: return "category_table";
    case TargetKind::text_encoder: return "text_encoder";
  }
  return "?";
}

Eigen::MatrixXd patchify(const core::Image& img, int p) {
  if (img.h % p != 0 || img.w % p != 0) throw ShapeMismatch("patchify: image not divisible");
  const int gh = img.h / p, gw = img.w / p;
  Eigen::MatrixXd out(gh * gw, p * p * img.c);
  for (int gr = 0; gr < gh; ++gr)
    for (int gc = 0; gc < gw; ++gc) {
      const long row = static_cast<long>(gr) * gw + gc;
      long col = 0;
      for (int dy = 0; dy < p; ++dy)
        for (int dx = 0; dx < p; ++dx)
          for (int ch = 0; ch < img.c; ++ch)
            out(row, col++) = img.at(gr * p + dy, gc * p + dx, ch);
    }
  return out;
}

core::Image unpatchify(const Eigen::MatrixXd& patches, int gh, int gw, int p, int channels) {
  if (patches.rows() != static_cast<long>(gh) * gw || patches.cols() != static_cast<long>(p) * p * channels)
    throw ShapeMismatch("unpatchify shape");
  core::Image img(gh * p, gw * p, channels);
  for (int gr = 0; gr < gh; ++gr)
    for (int gc = 0; gc < gw; ++gc) {
      const long row = static_cast<long>(gr) * gw + gc;
      long col = 0;
      for (int dy = 0; dy < p; ++dy)
        for (int dx = 0; dx < p; ++dx)
          for (int ch = 0; ch < channels; ++ch)
            img.at(gr * p + dy, gc * p + dx, ch) = patches(row, col++);
    }
  return img;
}

// ---- VisionEncoder ----

VisionEncoder::VisionEncoder(EncoderConfig cfg, std::string prefix)
    : cfg_(cfg), prefix_(std::move(prefix)) {
  cfg_.check();
}

void VisionEncoder::register_params(ParamStore& store, uint64_t seed) const {
  const int D = cfg_.dim;
  const int in = cfg_.patch_size * cfg_.patch_size * cfg_.channels;
  auto w = [&](const std::string& n, int r, int c) {
    store.add(prefix_ + n, normal_init(r, c, 0.02, seed, prefix_ + n));
  };
  auto zeros = [&](const std::string& n, int c) { store.add(prefix_ + n, ad::Matrix::Zero(1, c)); };
  auto ones = [&](const std::string& n, int c) { store.add(prefix_ + n, ad::Matrix::Ones(1, c)); };

  // fan-in scale keeps the patch content comparable to the position signal
  store.add(prefix_ + "patch/W",
            normal_init(in, D, 1.0 / std::sqrt(static_cast<double>(in)), seed, prefix_ + "patch/W"));
  zeros("patch/b", D);
  w("mask_token", 1, D);
  for (int i = 0; i < cfg_.depth; ++i) {
    const std::string b = "blk" + std::to_string(i) + "/";
    ones(b + "ln1/g", D);
    zeros(b + "ln1/b", D);
    w(b + "attn/Wq", D, D);
    w(b + "attn/Wk", D, D);
    w(b + "attn/Wv", D, D);
    w(b + "attn/Wo", D, D);
    zeros(b + "attn/bq", D);
    zeros(b + "attn/bk", D);
    zeros(b + "attn/bv", D);
    zeros(b + "attn/bo", D);
    ones(b + "ln2/g", D);
    zeros(b + "ln2/b", D);
    w(b + "mlp/W1", D, D * cfg_.mlp_ratio);
    zeros(b + "mlp/b1", D * cfg_.mlp_ratio);
    w(b + "mlp/W2", D * cfg_.mlp_ratio, D);
    zeros(b + "mlp/b2", D);
  }
  ones("ln_f/g", D);
  zeros("ln_f/b", D);
}

Var VisionEncoder::run_blocks(const ParamStore& store, Var x, int batch, int n_tokens) const {
  for (int i = 0; i < cfg_.depth; ++i) {
    const std::string b = prefix_ + "blk" + std::to_string(i) + "/";
    Var h = ad::layer_norm(x, store.get(b + "ln1/g"), store.get(b + "ln1/b"));
    Var q = ad::add_rowvec(ad::matmul(h, store.get(b + "attn/Wq")), store.get(b + "attn/bq"));
    Var k = ad::add_rowvec(ad::matmul(h, store.get(b + "attn/Wk")), store.get(b + "attn/bk"));
    Var v = ad::add_rowvec(ad::matmul(h, store.get(b + "attn/Wv")), store.get(b + "attn/bv"));
    Var att = ad::sdpa(q, k, v, cfg_.heads, n_tokens, n_tokens);
    Var o = ad::add_rowvec(ad::matmul(att, store.get(b + "attn/Wo")), store.get(b + "attn/bo"));
    x = ad::add(x, o);
    Var h2 = ad::layer_norm(x, store.get(b + "ln2/g"), store.get(b + "ln2/b"));
    Var m1 = ad::gelu(ad::add_rowvec(ad::matmul(h2, store.get(b + "mlp/W1")), store.get(b + "mlp/b1")));
    Var m2 = ad::add_rowvec(ad::matmul(m1, store.get(b + "mlp/W2")), store.get(b + "mlp/b2"));
    x = ad::add(x, m2);
  }
  (void)batch;
  return ad::layer_norm(x, store.get(prefix_ + "ln_f/g"), store.get(prefix_ + "ln_f/b"));
}

EncodedBatch VisionEncoder::forward(const ParamStore& store,
                                    const std::vector<const core::Image*>& views) const {
  std::vector<const transforms::MaskPattern*> no_masks(views.size(), nullptr);
  return forward_masked(store, views, no_masks, transforms::TokenDropMode::drop);
}

EncodedBatch VisionEncoder::forward_masked(const ParamStore& store,
                                           const std::vector<const core::Image*>& views,
                                           const std::vector<const transforms::MaskPattern*>& masks,
                                           transforms::TokenDropMode mode) const {
  if (views.empty() || views.size() != masks.size())
    throw ShapeMismatch("encoder forward: batch shape");
  const int B = static_cast<int>(views.size());
  const int N = cfg_.tokens();

  // patch embedding over the stacked batch
  Eigen::MatrixXd raw(static_cast<long>(B) * N, cfg_.patch_size * cfg_.patch_size * cfg_.channels);
  for (int b = 0; b < B; ++b) {
    const core::Image& img = *views[static_cast<size_t>(b)];
    if (img.h != cfg_.view_h || img.w != cfg_.view_w || img.c != cfg_.channels)
      throw ShapeMismatch("encoder forward: view resolution");
    raw.middleRows(static_cast<long>(b) * N, N) = patchify(img, cfg_.patch_size);
  }
  Var x = ad::add_rowvec(ad::matmul(ad::constant(std::move(raw)), store.get(prefix_ + "patch/W")),
                         store.get(prefix_ + "patch/b"));
  const Eigen::MatrixXd pos =
      kPosEmbedScale * sincos_2d(grid_coords(cfg_.grid_h(), cfg_.grid_w()), cfg_.dim);
  x = ad::add(x, ad::constant(pos.replicate(B, 1)));

  EncodedBatch out;
  out.batch = B;
  out.grid_indices.resize(static_cast<size_t>(B));

  bool any_mask = false;
  for (auto* m : masks) any_mask = any_mask || (m != nullptr);

  if (!any_mask) {
    out.tokens_per_sample = N;
    for (int b = 0; b < B; ++b) {
      out.grid_indices[static_cast<size_t>(b)].resize(static_cast<size_t>(N));
      for (int i = 0; i < N; ++i) out.grid_indices[static_cast<size_t>(b)][static_cast<size_t>(i)] = i;
    }
  } else if (mode == transforms::TokenDropMode::drop) {
    std::vector<int> gather;
    int kept = -1;
    for (int b = 0; b < B; ++b) {
      const auto* m = masks[static_cast<size_t>(b)];
      if (!m || static_cast<int>(m->grid.size()) != N)
        throw ShapeMismatch("encoder forward: mask grid");
      auto vis = m->visible_indices();
      if (kept < 0) kept = static_cast<int>(vis.size());
      if (static_cast<int>(vis.size()) != kept)
        throw ShapeMismatch("encoder forward: uneven token counts in batch");
      for (int g : vis) gather.push_back(b * N + g);
      out.grid_indices[static_cast<size_t>(b)] = std::move(vis);
    }
    x = ad::gather_rows(x, gather);
    out.tokens_per_sample = kept;
  } else {
    std::vector<uint8_t> flags;
    flags.reserve(static_cast<size_t>(B) * N);
    for (int b = 0; b < B; ++b) {
      const auto* m = masks[static_cast<size_t>(b)];
      if (!m || static_cast<int>(m->grid.size()) != N)
        throw ShapeMismatch("encoder forward: mask grid");
      flags.insert(flags.end(), m->grid.begin(), m->grid.end());
      out.grid_indices[static_cast<size_t>(b)].resize(static_cast<size_t>(N));
      for (int i = 0; i < N; ++i) out.grid_indices[static_cast<size_t>(b)][static_cast<size_t>(i)] = i;
    }
    // masked positions become mask tokens that keep their position embedding
    Var filler = ad::add(ad::broadcast_rows(store.get(prefix_ + "mask_token"), B * N),
                         ad::constant(pos.replicate(B, 1)));
    x = ad::select_rows_merge(x, filler, flags);
    out.tokens_per_sample = N;
  }

  out.tokens = run_blocks(store, x, B, out.tokens_per_sample);
  return out;
}

// ---- TextEncoder ----

TextEncoder::TextEncoder(int vocab_size, int dim, int depth, int heads, int out_dim,
                         std::string prefix)
    : vocab_(vocab_size), dim_(dim), depth_(depth), heads_(heads), out_dim_(out_dim),
      prefix_(std::move(prefix)) {
  if (dim_ % heads_ != 0) throw ShapeMismatch("text encoder dim/heads");
}

void TextEncoder::register_params(ParamStore& store, uint64_t seed) const {
  auto w = [&](const std::string& n, int r, int c) {
    store.add(prefix_ + n, normal_init(r, c, 0.02, seed, prefix_ + n));
  };
  auto zeros = [&](const std::string& n, int c) { store.add(prefix_ + n, ad::Matrix::Zero(1, c)); };
  auto ones = [&](const std::string& n, int c) { store.add(prefix_ + n, ad::Matrix::Ones(1, c)); };
  w("vocab", vocab_, dim_);
  for (int i = 0; i < depth_; ++i) {
    const std::string b = "blk" + std::to_string(i) + "/";
    ones(b + "ln1/g", dim_);
    zeros(b + "ln1/b", dim_);
    w(b + "attn/Wq", dim_, dim_);
    w(b + "attn/Wk", dim_, dim_);
    w(b + "attn/Wv", dim_, dim_);
    w(b + "attn/Wo", dim_, dim_);
    zeros(b + "attn/bq", dim_);
    zeros(b + "attn/bk", dim_);
    zeros(b + "attn/bv", dim_);
    zeros(b + "attn/bo", dim_);
    ones(b + "ln2/g", dim_);
    zeros(b + "ln2/b", dim_);
    w(b + "mlp/W1", dim_, dim_ * 4);
    zeros(b + "mlp/b1", dim_ * 4);
    w(b + "mlp/W2", dim_ * 4, dim_);
    zeros(b + "mlp/b2", dim_);
  }
  ones("ln_f/g", dim_);
  zeros("ln_f/b", dim_);
  w("proj/W", dim_, out_dim_);
  zeros("proj/b", out_dim_);
}

Var TextEncoder::forward(const ParamStore& store,
                         const std::vector<std::vector<int>>& captions) const {
  std::vector<Var> pooled;
  pooled.reserve(captions.size());
  for (const auto& tokens : captions) {
    if (tokens.empty()) throw ShapeMismatch("text encoder: empty caption");
    for (int t : tokens)
      if (t < 0 || t >= vocab_) throw ShapeMismatch("text encoder: token id out of range");
    const int n = static_cast<int>(tokens.size());
    Var x = ad::gather_rows(store.get(prefix_ + "vocab"), tokens);
    std::vector<double> posv(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) posv[i] = static_cast<double>(i);
    x = ad::add(x, ad::constant(sincos_1d(posv, dim_)));
    for (int i = 0; i < depth_; ++i) {
      const std::string b = prefix_ + "blk" + std::to_string(i) + "/";
      Var h = ad::layer_norm(x, store.get(b + "ln1/g"), store.get(b + "ln1/b"));
      Var q = ad::add_rowvec(ad::matmul(h, store.get(b + "attn/Wq")), store.get(b + "attn/bq"));
      Var k = ad::add_rowvec(ad::matmul(h, store.get(b + "attn/Wk")), store.get(b + "attn/bk"));
      Var v = ad::add_rowvec(ad::matmul(h, store.get(b + "attn/Wv")), store.get(b + "attn/bv"));
      Var att = ad::sdpa(q, k, v, heads_, n, n);
      x = ad::add(x, ad::add_rowvec(ad::matmul(att, store.get(b + "attn/Wo")), store.get(b + "attn/bo")));
      Var h2 = ad::layer_norm(x, store.get(b + "ln2/g"), store.get(b + "ln2/b"));
      Var m1 = ad::gelu(ad::add_rowvec(ad::matmul(h2, store.get(b + "mlp/W1")), store.get(b + "mlp/b1")));
      x = ad::add(x, ad::add_rowvec(ad::matmul(m1, store.get(b + "mlp/W2")), store.get(b + "mlp/b2")));
    }
    x = ad::layer_norm(x, store.get(prefix_ + "ln_f/g"), store.get(prefix_ + "ln_f/b"));
    pooled.push_back(ad::mean_rows(x));
  }
  Var stacked = pooled.size() == 1 ? pooled[0] : ad::concat_rows(pooled);
  return ad::add_rowvec(ad::matmul(stacked, store.get(prefix_ + "proj/W")),
                        store.get(prefix_ + "proj/b"));
}

// ---- CategoryTable ----

CategoryTable::CategoryTable(int num_classes, int dim, std::string prefix)
    : num_classes_(num_classes), dim_(dim), prefix_(std::move(prefix)) {}

void CategoryTable::register_params(ParamStore& store, uint64_t seed) const {
  store.add(prefix_ + "table", normal_init(num_classes_, dim_, 0.02, seed, prefix_ + "table"));
}

Var CategoryTable::embed(const ParamStore& store, const std::vector<int>& classes) const {
  for (int c : classes)
    if (c < 0 || c >= num_classes_) throw ShapeMismatch("category id out of range");
  return ad::gather_rows(store.get(prefix_ + "table"), classes);
}

Var CategoryTable::table(const ParamStore& store) const { return store.get(prefix_ + "table"); }

// ---- target encoding ----

void register_global_proj(ParamStore& store, int dim, uint64_t seed, const std::string& prefix) {
  store.add(prefix + "W", normal_init(dim, dim, 0.02, seed, prefix + "W"));
  store.add(prefix + "b", ad::Matrix::Zero(1, dim));
}

namespace {

Var pooled_global(const VisionEncoder& enc, const ParamStore& run_store,
                  const ParamStore& proj_store, const std::string& proj_prefix,
                  const core::Image& view) {
  EncodedBatch eb = enc.forward(run_store, {&view});
  Var mean = ad::mean_rows(eb.tokens);
  return ad::add_rowvec(ad::matmul(mean, proj_store.get(proj_prefix + "W")),
                        proj_store.get(proj_prefix + "b"));
}

}  // namespace

core::Representation encode_target(const TargetInput& y, const TargetEncoderConfig& cfg,
                                   const TargetEncoderContext& ctx, core::ReprKind want) {
  switch (cfg.kind) {
    case TargetKind::identity_pixels: {
      if (!y.view) throw KindMismatch("identity_pixels target needs a view");
      Eigen::MatrixXd patches = patchify(y.view->pixels, ctx.encoder->config().patch_size);
      return core::Representation(core::ReprKind::dense_pixels, ad::constant(std::move(patches)));
    }
    case TargetKind::shared:
    case TargetKind::momentum: {
      if (!y.view) throw KindMismatch("image target needs a view");
      const ParamStore* run = cfg.kind == TargetKind::shared ? ctx.store : ctx.momentum_store;
      if (!run) throw KindMismatch("missing parameter store for target encoder");
      if (want == core::ReprKind::global_feature) {
        Var g = pooled_global(*ctx.encoder, *run, *ctx.store, ctx.global_proj_prefix,
                              y.view->pixels);
        return core::Representation(core::ReprKind::global_feature, g);
      }
      EncodedBatch eb = ctx.encoder->forward(*run, {&y.view->pixels});
      return core::Representation(core::ReprKind::dense_feature, eb.tokens);
    }
    case TargetKind::category_table: {
      if (!y.category.has_value()) throw KindMismatch("category target needs a class id");
      Var row = ctx.categories->embed(*ctx.store, {*y.category});
      return core::Representation(core::ReprKind::category_embedding, row);
    }
    case TargetKind::text_encoder: {
      if (!y.caption) throw KindMismatch("text target needs a caption");
      Var row = ctx.text->forward(*ctx.store, {*y.caption});
      return core::Representation(core::ReprKind::text_embedding, row);
    }
  }
  throw KindMismatch("unhandled target kind");
}

}  // namespace m3i::nn
