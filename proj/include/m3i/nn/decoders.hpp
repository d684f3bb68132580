// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "m3i/ad/ad.hpp"
#include "m3i/nn/params.hpp"
#include "m3i/nn/posemb.hpp"

namespace m3i::nn {

struct DecoderConfig {
  int depth = 2;
  int dim = 64;
  int heads = 4;
  int out_dim = 64;
  int in_dim = 64;
};

// Per-sample assembly plan for dense decoding. Target cells either reuse a
// projected context token (intra-view visible cells) or start from the mask
// token plus a position embedding computed in the input view's frame with
// its top-left origin. Extra context tokens are appended to the sequence
// and attended to but not read out.
struct DenseDecodeItem {
  std::vector<int> seed_from;        // per target cell: row into batch tokens, or -1
  std::vector<Coord> target_coords;  // per target cell, input-frame patch units
  std::vector<int> context_rows;     // appended context, rows into batch tokens
};

// Transformer decoder predicting one vector per target grid cell.
class DenseDecoder {
 public:
  DenseDecoder(DecoderConfig cfg, std::string prefix = "dec_img/");
  void register_params(ParamStore& store, uint64_t seed) const;
  const DecoderConfig& config() const { return cfg_; }

  // batch_tokens: stacked encoder outputs; items must agree on target count
  // and context count. Returns (batch * n_targets) x out_dim.
  ad::Var decode(const ParamStore& store, const ad::Var& batch_tokens,
                 const std::vector<DenseDecodeItem>& items) const;

 private:
  DecoderConfig cfg_;
  std::string prefix_;
};

// Learned-query attention pooling followed by a linear projection.
class AttentionPool {
 public:
  AttentionPool(int dim, int heads, int out_dim, std::string prefix = "pool/");
  void register_params(ParamStore& store, uint64_t seed) const;

  // Pools each sample's row subset (uniform size) into one output row.
  ad::Var pool(const ParamStore& store, const ad::Var& batch_tokens,
               const std::vector<std::vector<int>>& row_sets) const;

 private:
  int dim_, heads_, out_dim_;
  std::string prefix_;
};

}  // namespace m3i::nn
