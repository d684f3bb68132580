// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/nn/decoders.hpp"

#include "m3i/error.hpp"

namespace m3i::nn {

using ad::Var;

DenseDecoder::DenseDecoder(DecoderConfig cfg, std::string prefix)
    : cfg_(cfg), prefix_(std::move(prefix)) {
  if (cfg_.dim % cfg_.heads != 0) throw ShapeMismatch("decoder dim/heads");
  if (cfg_.dim % 4 != 0) throw ShapeMismatch("decoder dim must be divisible by 4");
}

void DenseDecoder::register_params(ParamStore& store, uint64_t seed) const {
  auto w = [&](const std::string& n, int r, int c) {
    store.add(prefix_ + n, normal_init(r, c, 0.02, seed, prefix_ + n));
  };
  auto zeros = [&](const std::string& n, int c) { store.add(prefix_ + n, ad::Matrix::Zero(1, c)); };
  auto ones = [&](const std::string& n, int c) { store.add(prefix_ + n, ad::Matrix::Ones(1, c)); };
  const int D = cfg_.dim;
  w("proj/W", cfg_.in_dim, D);
  zeros("proj/b", D);
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
    w(b + "mlp/W1", D, D * 4);
    zeros(b + "mlp/b1", D * 4);
    w(b + "mlp/W2", D * 4, D);
    zeros(b + "mlp/b2", D);
  }
  w("head/W", D, cfg_.out_dim);
  zeros("head/b", cfg_.out_dim);
}

Var DenseDecoder::decode(const ParamStore& store, const Var& batch_tokens,
                         const std::vector<DenseDecodeItem>& items) const {
  if (items.empty()) throw ShapeMismatch("decode: no items");
  const size_t nt = items[0].seed_from.size();
  const size_t nc = items[0].context_rows.size();
  for (const auto& it : items) {
    if (it.seed_from.size() != nt || it.target_coords.size() != nt ||
        it.context_rows.size() != nc)
      throw GeometryMismatch("decode: items disagree on sequence structure");
  }

  Var proj = ad::add_rowvec(ad::matmul(batch_tokens, store.get(prefix_ + "proj/W")),
                            store.get(prefix_ + "proj/b"));

  std::vector<Var> seqs;
  seqs.reserve(items.size());
  for (const auto& it : items) {
    // seeded cells reuse the projected token; masked cells get the mask
    // token plus an input-frame position embedding
    std::vector<int> seed_rows(nt, 0);
    std::vector<uint8_t> flags(nt, 0);
    for (size_t t = 0; t < nt; ++t) {
      if (it.seed_from[t] >= 0) {
        seed_rows[t] = it.seed_from[t];
        flags[t] = 1;
      }
    }
    Var seeded = ad::gather_rows(proj, seed_rows);
    Eigen::MatrixXd pos = 0.25 * sincos_2d(it.target_coords, cfg_.dim);
    Var masked = ad::add_rowvec(ad::constant(std::move(pos)), store.get(prefix_ + "mask_token"));
    Var targets = ad::select_rows_merge(seeded, masked, flags);
    if (nc > 0) {
      Var extra = ad::gather_rows(proj, it.context_rows);
      targets = ad::concat_rows({targets, extra});
    }
    seqs.push_back(targets);
  }
  Var x = seqs.size() == 1 ? seqs[0] : ad::concat_rows(seqs);
  const int n_tokens = static_cast<int>(nt + nc);
  for (int i = 0; i < cfg_.depth; ++i) {
    const std::string b = prefix_ + "blk" + std::to_string(i) + "/";
    Var h = ad::layer_norm(x, store.get(b + "ln1/g"), store.get(b + "ln1/b"));
    Var q = ad::add_rowvec(ad::matmul(h, store.get(b + "attn/Wq")), store.get(b + "attn/bq"));
    Var k = ad::add_rowvec(ad::matmul(h, store.get(b + "attn/Wk")), store.get(b + "attn/bk"));
    Var v = ad::add_rowvec(ad::matmul(h, store.get(b + "attn/Wv")), store.get(b + "attn/bv"));
    Var att = ad::sdpa(q, k, v, cfg_.heads, n_tokens, n_tokens);
    x = ad::add(x, ad::add_rowvec(ad::matmul(att, store.get(b + "attn/Wo")), store.get(b + "attn/bo")));
    Var h2 = ad::layer_norm(x, store.get(b + "ln2/g"), store.get(b + "ln2/b"));
    Var m1 = ad::gelu(ad::add_rowvec(ad::matmul(h2, store.get(b + "mlp/W1")), store.get(b + "mlp/b1")));
    x = ad::add(x, ad::add_rowvec(ad::matmul(m1, store.get(b + "mlp/W2")), store.get(b + "mlp/b2")));
  }
  // read out the target cells of every sample
  if (nc > 0) {
    std::vector<int> rows;
    rows.reserve(items.size() * nt);
    for (size_t b = 0; b < items.size(); ++b)
      for (size_t t = 0; t < nt; ++t)
        rows.push_back(static_cast<int>(b * (nt + nc) + t));
    x = ad::gather_rows(x, rows);
  }
  return ad::add_rowvec(ad::matmul(x, store.get(prefix_ + "head/W")), store.get(prefix_ + "head/b"));
}

AttentionPool::AttentionPool(int dim, int heads, int out_dim, std::string prefix)
    : dim_(dim), heads_(heads), out_dim_(out_dim), prefix_(std::move(prefix)) {
  if (dim_ % heads_ != 0) throw ShapeMismatch("attention pool dim/heads");
}

void AttentionPool::register_params(ParamStore& store, uint64_t seed) const {
  auto w = [&](const std::string& n, int r, int c) {
    store.add(prefix_ + n, normal_init(r, c, 0.02, seed, prefix_ + n));
  };
  auto zeros = [&](const std::string& n, int c) { store.add(prefix_ + n, ad::Matrix::Zero(1, c)); };
  w("q", 1, dim_);
  w("Wk", dim_, dim_);
  w("Wv", dim_, dim_);
  w("Wo", dim_, dim_);
  zeros("bk", dim_);
  zeros("bv", dim_);
  zeros("bo", dim_);
  w("out/W", dim_, out_dim_);
  zeros("out/b", out_dim_);
}

Var AttentionPool::pool(const ParamStore& store, const Var& batch_tokens,
                        const std::vector<std::vector<int>>& row_sets) const {
  if (row_sets.empty()) throw ShapeMismatch("pool: no row sets");
  const size_t n = row_sets[0].size();
  if (n == 0) throw ShapeMismatch("pool: empty row set");
  std::vector<int> gather;
  gather.reserve(row_sets.size() * n);
  for (const auto& rs : row_sets) {
    if (rs.size() != n) throw ShapeMismatch("pool: uneven row sets");
    gather.insert(gather.end(), rs.begin(), rs.end());
  }
  const int B = static_cast<int>(row_sets.size());
  Var sel = ad::gather_rows(batch_tokens, gather);
  Var k = ad::add_rowvec(ad::matmul(sel, store.get(prefix_ + "Wk")), store.get(prefix_ + "bk"));
  Var v = ad::add_rowvec(ad::matmul(sel, store.get(prefix_ + "Wv")), store.get(prefix_ + "bv"));
  Var q = ad::broadcast_rows(store.get(prefix_ + "q"), B);
  Var pooled = ad::sdpa(q, k, v, heads_, 1, static_cast<int>(n));
  Var o = ad::add_rowvec(ad::matmul(pooled, store.get(prefix_ + "Wo")), store.get(prefix_ + "bo"));
  return ad::add_rowvec(ad::matmul(o, store.get(prefix_ + "out/W")), store.get(prefix_ + "out/b"));
}

}  // namespace m3i::nn
