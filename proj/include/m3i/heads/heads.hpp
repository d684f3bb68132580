// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "m3i/ad/ad.hpp"
#include "m3i/core/types.hpp"
#include "m3i/nn/params.hpp"

namespace m3i::heads {

enum class Family : uint8_t { gaussian, boltzmann };

// Predicted posterior over the target representation. Gaussian heads read
// sigma, Boltzmann heads read tau and the normalization flag.
struct PredictionHead {
  Family family = Family::gaussian;
  double sigma = 1.0;
  double tau = 0.2;
  bool normalize_embeddings = false;
};

enum class Mechanism : uint8_t { negatives, stop_gradient, ema_target, decorrelation, none };

const char* to_string(Mechanism m);

struct RegularizerSpec {
  Mechanism mechanism = Mechanism::none;
  double ema_coeff = 0.995;        // read by momentum target encoders
  double decorrelation_weight = 1.0;
};

// (1 / 2 sigma^2) * ||z_y - z_hat||^2, averaged over dense positions (rows).
ad::Var gaussian_nll(const core::Representation& z_y, const core::Representation& z_hat,
                     double sigma);

// Softmax cross-entropy over {positive} + negatives at temperature tau.
// Embeddings are unit-normalized first when `normalize` is set.
ad::Var boltzmann_nll(const core::Representation& z_hat, const core::Representation& z_pos,
                      const std::vector<core::Representation>& negatives, double tau,
                      bool normalize = false);

// Batched form: one candidate row set shared by all queries. positive_index
// gives the candidate row of each query; entries of `logit_bias` (if given)
// are added to the logits, which is how self-matches are excluded.
ad::Var boltzmann_nll_batch(const ad::Var& z_hat, const ad::Var& candidates,
                            const std::vector<int>& positive_index, double tau, bool normalize,
                            double label_smoothing = 0.0,
                            const ad::Matrix* logit_bias = nullptr);

// Soft-target cross-entropy between two logit vectors through a shared
// temperature; the Boltzmann form used when no candidate set exists
// (prototype softmax over feature components).
ad::Var boltzmann_soft_nll(const ad::Var& pred_logits, const ad::Var& target_logits, double tau);

// ||C - I||_F^2 of the batch cross-correlation of standardized features.
// Zero-variance columns are handled by an epsilon-floored std (1e-6).
ad::Var decorrelation_penalty(const ad::Var& batch_z);

core::Representation stop_gradient(const core::Representation& z);

// target <- m * target + (1 - m) * online, elementwise over matching names.
// Must be called by the single optimizer thread between steps.
void ema_update(nn::ParamStore& target_params, const nn::ParamStore& online_params, double m);

}  // namespace m3i::heads
