// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "m3i/rng.hpp"

namespace m3i::oracle {

// Dense probability table over named axes (row-major strides, last axis
// fastest). All quantities are in nats.
class DiscreteJoint {
 public:
  DiscreteJoint() = default;
  DiscreteJoint(std::vector<std::string> axis_names, std::vector<int> sizes);

  int axis(const std::string& name) const;
  int size(const std::string& name) const { return sizes_[static_cast<size_t>(axis(name))]; }
  const std::vector<int>& sizes() const { return sizes_; }
  const std::vector<std::string>& names() const { return names_; }
  size_t cells() const { return probs_.size(); }

  double& at(const std::vector<int>& idx) { return probs_[offset(idx)]; }
  double at(const std::vector<int>& idx) const { return probs_[offset(idx)]; }
  std::vector<double>& raw() { return probs_; }
  const std::vector<double>& raw() const { return probs_; }

  size_t offset(const std::vector<int>& idx) const;
  void unravel(size_t off, std::vector<int>& idx) const;

  void normalize();
  void check() const;  // non-negative, sums to 1, support caps

  // marginal over the given axes (in the given order)
  DiscreteJoint marginal(const std::vector<std::string>& axes) const;

 private:
  std::vector<std::string> names_;
  std::vector<int> sizes_;
  std::vector<size_t> strides_;
  std::vector<double> probs_;
};

// Conditional table q(z | row) with rows indexed by the row-major product of
// the conditioning axes (z_x, t_x, t_y by convention).
struct ApproxPosterior {
  Eigen::MatrixXd table;  // rows sum to 1
  void check() const;
};

// I(X; Y | C) by full enumeration; axis sets may hold several names.
double exact_mi(const DiscreteJoint& joint, const std::vector<std::string>& x_axes,
                const std::vector<std::string>& y_axes,
                const std::vector<std::string>& cond_axes);

struct Decomposition {
  double entropy_term;        // H(z_y | t_y)
  double cross_entropy_term;  // E[ H(p(z_y|y), p(z_y | z_x, t_x, t_y)) ]
  double mi;                  // entropy_term - cross_entropy_term
};

// Entropy/cross-entropy split of the conditional MI for joints built as
// p(s) p(t_x) p(t_y) p(z_x|s,t_x) p(z_y|s,t_y). Both terms are enumerated
// independently of exact_mi.
Decomposition decompose_mi(const DiscreteJoint& joint);

// entropy_term + E[log q]; never exceeds the exact MI, with equality at the
// Bayes posterior.
double variational_bound(const DiscreteJoint& joint, const ApproxPosterior& q);

// Grouped form over target axes z_y1..z_yK with per-group posteriors that
// condition on (z_x, t_x, t_y) only.
double grouped_bound(const DiscreteJoint& joint, const std::vector<std::string>& target_axes,
                     const std::vector<ApproxPosterior>& q_list);

// True posterior p(target | z_x, t_x, t_y); rows of probability zero are
// uniform. `target_axes` may be a single axis or a group.
ApproxPosterior bayes_posterior(const DiscreteJoint& joint,
                                const std::vector<std::string>& target_axes);
ApproxPosterior uniform_posterior(const DiscreteJoint& joint,
                                  const std::vector<std::string>& target_axes);

struct SupremumResult {
  double mi;
  double best_bound;
  double gap;  // mi - best_bound
};

// Maximizes the variational bound over q: three restarts (uniform, random,
// Bayes-posterior warm start), 500 gradient-ascent steps of size 0.5 on
// softmax-parameterized rows.
SupremumResult check_supremum(const DiscreteJoint& joint, uint64_t seed = 0);

// ---- constructors used by tests and the fuzzing suite ----

// p(s) p(t_x) p(t_y) p(z_x|s,t_x) p(z_y^k|s,t_y): axes
// {s, t_x, t_y, z_x, z_y} for K=1 else {s, t_x, t_y, z_x, z_y1..z_yK}.
DiscreteJoint random_factorized_joint(Rng& rng, int max_support, int target_groups = 1);

// z_y states merged according to `merge_to` (data-processing experiments).
DiscreteJoint coarsen_axis(const DiscreteJoint& joint, const std::string& axis,
                           const std::vector<int>& merge_to, int new_size);

// Full verification suite; prints one pass/fail line per check. Returns
// true when every check passes.
bool run_oracle_suite(uint64_t seed, int trials, std::ostream& os);

}  // namespace m3i::oracle
