// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/harness/evalkit.hpp"

#include <cmath>

#include "m3i/error.hpp"
#include "m3i/harness/metrics.hpp"
#include "m3i/harness/trainer.hpp"
#include "m3i/rng.hpp"

namespace m3i::harness {

Eigen::MatrixXd frozen_features(const pipeline::MethodModel& model,
                                const std::vector<core::Sample>& samples, int chunk) {
  const int dim = model.encoder().config().dim;
  Eigen::MatrixXd out(static_cast<long>(samples.size()), dim);
  for (size_t start = 0; start < samples.size(); start += static_cast<size_t>(chunk)) {
    const size_t end = std::min(samples.size(), start + static_cast<size_t>(chunk));
    std::vector<core::Sample> part(samples.begin() + static_cast<long>(start),
                                   samples.begin() + static_cast<long>(end));
    out.middleRows(static_cast<long>(start), static_cast<long>(end - start)) =
        pipeline::extract_global_features(model, part);
  }
  return out;
}

double linear_probe_accuracy(const Eigen::MatrixXd& train_x, const std::vector<int>& train_y,
                             const Eigen::MatrixXd& val_x, const std::vector<int>& val_y,
                             int num_classes, uint64_t seed) {
  if (train_x.rows() != static_cast<long>(train_y.size()) ||
      val_x.rows() != static_cast<long>(val_y.size()))
    throw ShapeMismatch("probe labels");
  const long n = train_x.rows(), d = train_x.cols();

  // standardize with train statistics
  Eigen::RowVectorXd mu = train_x.colwise().mean();
  Eigen::RowVectorXd sd(d);
  for (long c = 0; c < d; ++c)
    sd(c) = std::max(std::sqrt((train_x.col(c).array() - mu(c)).square().mean()), 1e-8);
  auto standardize = [&](const Eigen::MatrixXd& x) {
    return ((x.rowwise() - mu).array().rowwise() / sd.array()).matrix();
  };
  Eigen::MatrixXd xs = standardize(train_x);
  Eigen::MatrixXd vs = standardize(val_x);

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, num_classes);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(num_classes);
  Eigen::MatrixXd mw = w, vw = w;
  Eigen::RowVectorXd mb = b, vb = b;
  const double lr = 0.05, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const int epochs = 300;
  (void)seed;

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, num_classes);
  for (long i = 0; i < n; ++i) onehot(i, train_y[static_cast<size_t>(i)]) = 1.0;

  for (int t = 1; t <= epochs; ++t) {
    Eigen::MatrixXd logits = (xs * w).rowwise() + b;
    Eigen::MatrixXd probs(n, num_classes);
    for (long i = 0; i < n; ++i) {
      const double m = logits.row(i).maxCoeff();
      Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
      probs.row(i) = (e / e.sum()).matrix();
    }
    Eigen::MatrixXd diff = (probs - onehot) / static_cast<double>(n);
    Eigen::MatrixXd gw = xs.transpose() * diff + 1e-4 * w;
    Eigen::RowVectorXd gb = diff.colwise().sum();
    const double c1 = 1.0 - std::pow(beta1, t), c2 = 1.0 - std::pow(beta2, t);
    mw = beta1 * mw + (1 - beta1) * gw;
    vw = beta2 * vw + (1 - beta2) * gw.cwiseProduct(gw);
    mb = beta1 * mb + (1 - beta1) * gb;
    vb = beta2 * vb + (1 - beta2) * gb.cwiseProduct(gb);
    w -= lr * ((mw / c1).array() / ((vw / c2).array().sqrt() + eps)).matrix();
    b -= lr * ((mb / c1).array() / ((vb / c2).array().sqrt() + eps)).matrix();
  }

  int correct = 0;
  Eigen::MatrixXd vlogits = (vs * w).rowwise() + b;
  for (long i = 0; i < vlogits.rows(); ++i) {
    long arg = 0;
    vlogits.row(i).maxCoeff(&arg);
    correct += (static_cast<int>(arg) == val_y[static_cast<size_t>(i)]);
  }
  return static_cast<double>(correct) / static_cast<double>(val_y.size());
}

double linear_probe(const pipeline::MethodModel& model, const Dataset& data, uint64_t seed) {
  Eigen::MatrixXd tx = frozen_features(model, data.train);
  Eigen::MatrixXd vx = frozen_features(model, data.val);
  std::vector<int> ty, vy;
  for (const auto& s : data.train) ty.push_back(*s.category);
  for (const auto& s : data.val) vy.push_back(*s.category);
  return linear_probe_accuracy(tx, ty, vx, vy, data.spec.num_classes, seed);
}

double linear_probe(const std::string& ckpt_path, const std::string& data_dir) {
  LoadedModel lm = load_model(ckpt_path);
  Dataset data = load_dataset(data_dir);
  return linear_probe(*lm.model, data);
}

CollapseReport collapse_report(const pipeline::MethodModel& model, const Dataset& data,
                               double tau) {
  CollapseReport r;
  Eigen::MatrixXd f = frozen_features(model, data.val);
  r.feature_std = feature_std(f);
  r.effective_rank = effective_rank(f);

  // mean softmax entropy over other samples' normalized features
  Eigen::MatrixXd fn = f;
  for (long i = 0; i < fn.rows(); ++i) {
    const double nrm = fn.row(i).norm();
    if (nrm > 1e-12) fn.row(i) /= nrm;
  }
  const long n = std::min<long>(fn.rows(), 256);
  Eigen::MatrixXd logits = fn.topRows(n) * fn.topRows(n).transpose() / tau;
  double ent = 0.0;
  for (long i = 0; i < n; ++i) {
    logits(i, i) = -1e30;  // exclude self
    const double m = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    Eigen::ArrayXd p = e / e.sum();
    for (long j = 0; j < p.size(); ++j)
      if (p(j) > 0.0) ent -= p(j) * std::log(p(j));
  }
  r.boltzmann_entropy = ent / static_cast<double>(n);
  return r;
}

CollapseReport collapse_report(const std::string& ckpt_path, const std::string& data_dir) {
  LoadedModel lm = load_model(ckpt_path);
  Dataset data = load_dataset(data_dir);
  return collapse_report(*lm.model, data, lm.method.head.tau);
}

}  // namespace m3i::harness
