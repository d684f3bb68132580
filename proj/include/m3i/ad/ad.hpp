// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace m3i::ad {

using Matrix = Eigen::MatrixXd;

// One node of a dynamically built computation graph. Values are dense
// double matrices; scalars are 1x1. Graphs are built eagerly by the op
// functions below and freed when the last Var handle goes out of scope.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad, accumulates into parents' grads. Null for leaves
  // and constants.
  std::function<void(Node&)> backprop;
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& value_mut() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  long rows() const { return node_->value.rows(); }
  long cols() const { return node_->value.cols(); }

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Matrix v);
Var scalar(double v);
Var leaf(Matrix v, bool requires_grad = true);

// Reverse sweep from `root` seeded with `seed` (or 1 for 1x1 roots).
// Grads of every node reachable through requires_grad edges are reset
// before accumulation, so repeated calls do not mix passes.
void backward(const Var& root);
void backward(const Var& root, const Matrix& seed);

// Value-identical node that blocks gradient flow to its producer.
Var detach(const Var& x);

// ---- arithmetic ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scalar_mul(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var neg(const Var& a);

// broadcast a 1xD row vector over the rows of X
Var add_rowvec(const Var& x, const Var& v);
Var mul_rowvec(const Var& x, const Var& v);
Var broadcast_rows(const Var& v, int n);

// ---- elementwise nonlinearities ----
Var gelu(const Var& x);
Var cw_sqrt(const Var& x);            // derivative guarded at 0
Var cw_reciprocal(const Var& x);
Var cw_max_const(const Var& x, double c);
Var cw_exp(const Var& x);
Var cw_log(const Var& x);

// ---- reductions ----
Var sum_all(const Var& x);
Var mean_all(const Var& x);
Var mean_rows(const Var& x);  // 1xD column means
Var sum_rows(const Var& x);   // 1xD column sums

// ---- row-structured ops ----
Var gather_rows(const Var& x, const std::vector<int>& idx);
Var concat_rows(const std::vector<Var>& parts);
// out.row(i) = flags[i] ? a.row(i) : b.row(i)
Var select_rows_merge(const Var& a, const Var& b, const std::vector<uint8_t>& flags);
Var row_softmax(const Var& x);
Var row_log_softmax(const Var& x);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-6);
Var l2_normalize_rows(const Var& x, double eps = 1e-12);

// ---- attention ----
// Multi-head scaled dot-product self/cross attention over per-sample row
// blocks: q has batch*nq rows, k/v batch*nk rows, d columns divisible by
// heads. Softmax is stabilized by max-logit subtraction.
Var sdpa(const Var& q, const Var& k, const Var& v, int heads, int nq, int nk);

// ---- losses ----
// Mean over rows of -log p[target]; optional label smoothing mass spread
// uniformly over classes. `logp` must be row log-probabilities.
Var nll_index(const Var& logp, const std::vector<int>& targets, double label_smoothing = 0.0);
// Mean over rows of -sum_c P[r,c] * logp[r,c].
Var soft_xent(const Var& logp, const Var& target_probs);

// Finite-difference directional probe used by tests: d f / d x[i,j].
double finite_diff(const std::function<double(const Matrix&)>& f, const Matrix& x0,
                   int i, int j, double h = 1e-6);

}  // namespace m3i::ad
