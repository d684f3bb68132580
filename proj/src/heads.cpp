// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/heads/heads.hpp"

#include "m3i/error.hpp"

namespace m3i::heads {

using ad::Var;

const char* to_string(Mechanism m) {
  switch (m) {
    case Mechanism::negatives: return "negatives";
    case Mechanism::stop_gradient: return "stop_gradient";
    case Mechanism::ema_target: return "ema_target";
    case Mechanism::decorrelation: return "decorrelation";
    case Mechanism::none: return "none";
  }
  return "?";
}

Var gaussian_nll(const core::Representation& z_y, const core::Representation& z_hat,
                 double sigma) {
  if (sigma <= 0.0) throw NonPositiveSigma("sigma must be > 0");
  if (z_y.values.rows() != z_hat.values.rows() || z_y.values.cols() != z_hat.values.cols())
    throw ShapeMismatch("gaussian_nll: representation shapes differ");
  Var d = ad::sub(z_y.values, z_hat.values);
  Var sq = ad::mul(d, d);
  const double scale = 1.0 / (2.0 * sigma * sigma * static_cast<double>(z_y.values.rows()));
  return ad::scalar_mul(ad::sum_all(sq), scale);
}

Var boltzmann_nll(const core::Representation& z_hat, const core::Representation& z_pos,
                  const std::vector<core::Representation>& negatives, double tau,
                  bool normalize) {
  if (tau <= 0.0) throw NonPositiveTau("tau must be > 0");
  if (!z_hat.values.defined() || !z_pos.values.defined())
    throw EmptyCandidateSet("boltzmann_nll needs a prediction and a positive");
  const long dim = z_hat.values.cols();
  if (z_pos.values.cols() != dim) throw ShapeMismatch("boltzmann_nll: dim mismatch");
  std::vector<Var> rows;
  rows.reserve(negatives.size() + 1);
  rows.push_back(z_pos.values);
  for (const auto& n : negatives) {
    if (n.values.cols() != dim) throw ShapeMismatch("boltzmann_nll: negative dim mismatch");
    rows.push_back(n.values);
  }
  Var cands = rows.size() == 1 ? rows[0] : ad::concat_rows(rows);
  Var q = z_hat.values;
  if (normalize) {
    q = ad::l2_normalize_rows(q);
    cands = ad::l2_normalize_rows(cands);
  }
  Var logits = ad::scalar_mul(ad::matmul(q, ad::transpose(cands)), 1.0 / tau);
  std::vector<int> pos(static_cast<size_t>(q.rows()), 0);
  return ad::nll_index(ad::row_log_softmax(logits), pos);
}

Var boltzmann_nll_batch(const Var& z_hat, const Var& candidates,
                        const std::vector<int>& positive_index, double tau, bool normalize,
                        double label_smoothing, const ad::Matrix* logit_bias) {
  if (tau <= 0.0) throw NonPositiveTau("tau must be > 0");
  if (candidates.rows() == 0) throw EmptyCandidateSet("no candidates");
  if (static_cast<long>(positive_index.size()) != z_hat.rows())
    throw ShapeMismatch("boltzmann_nll_batch: positive indices");
  Var q = z_hat, c = candidates;
  if (normalize) {
    q = ad::l2_normalize_rows(q);
    c = ad::l2_normalize_rows(c);
  }
  Var logits = ad::scalar_mul(ad::matmul(q, ad::transpose(c)), 1.0 / tau);
  if (logit_bias) {
    if (logit_bias->rows() != logits.rows() || logit_bias->cols() != logits.cols())
      throw ShapeMismatch("boltzmann_nll_batch: bias shape");
    logits = ad::add(logits, ad::constant(*logit_bias));
  }
  return ad::nll_index(ad::row_log_softmax(logits), positive_index, label_smoothing);
}

Var boltzmann_soft_nll(const Var& pred_logits, const Var& target_logits, double tau) {
  if (tau <= 0.0) throw NonPositiveTau("tau must be > 0");
  if (pred_logits.rows() != target_logits.rows() || pred_logits.cols() != target_logits.cols())
    throw ShapeMismatch("boltzmann_soft_nll shapes");
  Var p_t = ad::row_softmax(ad::scalar_mul(target_logits, 1.0 / tau));
  Var logp = ad::row_log_softmax(ad::scalar_mul(pred_logits, 1.0 / tau));
  return ad::soft_xent(logp, p_t);
}

Var decorrelation_penalty(const Var& batch_z) {
  const long B = batch_z.rows();
  const long D = batch_z.cols();
  if (B < 2) throw Error("decorrelation_penalty: batch must have at least 2 rows");
  Var mu = ad::mean_rows(batch_z);
  Var centered = ad::sub(batch_z, ad::broadcast_rows(mu, static_cast<int>(B)));
  Var var = ad::mean_rows(ad::mul(centered, centered));
  Var std_f = ad::cw_max_const(ad::cw_sqrt(var), 1e-6);
  Var zs = ad::mul_rowvec(centered, ad::cw_reciprocal(std_f));
  Var corr = ad::scalar_mul(ad::matmul(ad::transpose(zs), zs), 1.0 / static_cast<double>(B));
  Var diff = ad::sub(corr, ad::constant(ad::Matrix::Identity(D, D)));
  return ad::sum_all(ad::mul(diff, diff));
}

core::Representation stop_gradient(const core::Representation& z) {
  return core::Representation(z.kind, ad::detach(z.values));
}

void ema_update(nn::ParamStore& target_params, const nn::ParamStore& online_params, double m) {
  if (target_params.size() != online_params.size())
    throw StructureMismatch("ema_update: parameter counts differ");
  for (size_t i = 0; i < target_params.items().size(); ++i) {
    auto& [tname, tvar] = target_params.items()[i];
    const auto& [oname, ovar] = online_params.items()[i];
    if (tname != oname) throw StructureMismatch("ema_update: name order differs at " + tname);
    if (tvar.rows() != ovar.rows() || tvar.cols() != ovar.cols())
      throw StructureMismatch("ema_update: shape differs for " + tname);
    tvar.value_mut() = m * tvar.value() + (1.0 - m) * ovar.value();
  }
}

}  // namespace m3i::heads
