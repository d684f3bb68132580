// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/harness/optimizer.hpp"

#include <cmath>

#include "m3i/error.hpp"

namespace m3i::harness {

AdamW::AdamW(const nn::ParamStore& params, AdamConfig cfg) : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& [name, var] : params.items()) {
    m_.emplace_back(name, Eigen::MatrixXd::Zero(var.rows(), var.cols()));
    v_.emplace_back(name, Eigen::MatrixXd::Zero(var.rows(), var.cols()));
  }
}

void AdamW::step(nn::ParamStore& params, double lr_scale) {
  if (params.size() != m_.size()) throw StructureMismatch("optimizer/parameter set");
  ++t_;
  const double lr = cfg_.lr * lr_scale;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < m_.size(); ++i) {
    auto& [name, var] = params.items()[i];
    if (m_[i].first != name) throw StructureMismatch("optimizer order for " + name);
    const Eigen::MatrixXd& g = var.grad();
    if (g.rows() != var.rows() || g.cols() != var.cols())
      throw StructureMismatch("missing gradient for " + name);
    Eigen::MatrixXd& m = m_[i].second;
    Eigen::MatrixXd& v = v_[i].second;
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const Eigen::MatrixXd mhat = m / bc1;
    const Eigen::MatrixXd vhat = v / bc2;
    Eigen::MatrixXd upd =
        mhat.array() / (vhat.array().sqrt() + cfg_.eps);
    if (var.rows() > 1 && cfg_.weight_decay > 0.0)
      upd.array() += cfg_.weight_decay * var.value().array();
    var.value_mut() -= lr * upd;
  }
}

void AdamW::restore(int64_t t, std::vector<std::pair<std::string, Eigen::MatrixXd>> m,
                    std::vector<std::pair<std::string, Eigen::MatrixXd>> v) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw IncompatibleCheckpoint("optimizer moment count");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

double lr_schedule(int64_t step, int64_t total_steps, double warmup_frac, bool cosine) {
  if (total_steps <= 0) return 1.0;
  const double warmup = std::max(1.0, warmup_frac * static_cast<double>(total_steps));
  const double s = static_cast<double>(step);
  if (s < warmup) return (s + 1.0) / warmup;
  if (!cosine) return 1.0;
  const double progress = (s - warmup) / std::max(1.0, static_cast<double>(total_steps) - warmup);
  return 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min(1.0, progress)));
}

}  // namespace m3i::harness
