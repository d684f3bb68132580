// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/oracle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>

#include "m3i/error.hpp"

namespace m3i::oracle {

namespace {
constexpr int kMaxSupport = 16;
constexpr size_t kMaxCells = 1000000;

double xlogy(double x, double y) { return x > 0.0 ? x * std::log(y) : 0.0; }
}  // namespace

DiscreteJoint::DiscreteJoint(std::vector<std::string> axis_names, std::vector<int> sizes)
    : names_(std::move(axis_names)), sizes_(std::move(sizes)) {
  if (names_.size() != sizes_.size()) throw ShapeMismatch("joint: names/sizes");
  size_t total = 1;
  for (int s : sizes_) {
    if (s <= 0 || s > kMaxSupport) throw Error("joint: axis support outside [1,16]");
    total *= static_cast<size_t>(s);
  }
  if (total > kMaxCells) throw Error("joint: table too large");
  strides_.assign(sizes_.size(), 1);
  for (int i = static_cast<int>(sizes_.size()) - 2; i >= 0; --i)
    strides_[static_cast<size_t>(i)] =
        strides_[static_cast<size_t>(i) + 1] * static_cast<size_t>(sizes_[static_cast<size_t>(i) + 1]);
  probs_.assign(total, 0.0);
}

int DiscreteJoint::axis(const std::string& name) const {
  for (size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  throw Error("joint: unknown axis '" + name + "'");
}

size_t DiscreteJoint::offset(const std::vector<int>& idx) const {
  size_t off = 0;
  for (size_t i = 0; i < idx.size(); ++i) off += strides_[i] * static_cast<size_t>(idx[i]);
  return off;
}

void DiscreteJoint::unravel(size_t off, std::vector<int>& idx) const {
  idx.resize(sizes_.size());
  for (size_t i = 0; i < sizes_.size(); ++i) {
    idx[i] = static_cast<int>(off / strides_[i]);
    off %= strides_[i];
  }
}

void DiscreteJoint::normalize() {
  const double s = std::accumulate(probs_.begin(), probs_.end(), 0.0);
  if (s <= 0.0) throw Error("joint: zero mass");
  for (double& p : probs_) p /= s;
}

void DiscreteJoint::check() const {
  double s = 0.0;
  for (double p : probs_) {
    if (p < 0.0) throw Error("joint: negative probability");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12) throw Error("joint: probabilities sum to " + std::to_string(s));
}

DiscreteJoint DiscreteJoint::marginal(const std::vector<std::string>& axes) const {
  std::vector<int> keep;
  std::vector<int> out_sizes;
  keep.reserve(axes.size());
  for (const auto& a : axes) {
    keep.push_back(axis(a));
    out_sizes.push_back(sizes_[static_cast<size_t>(axis(a))]);
  }
  DiscreteJoint out(axes, out_sizes);
  std::vector<int> idx, oidx(axes.size());
  for (size_t off = 0; off < probs_.size(); ++off) {
    if (probs_[off] == 0.0) continue;
    unravel(off, idx);
    for (size_t i = 0; i < keep.size(); ++i) oidx[i] = idx[static_cast<size_t>(keep[i])];
    out.probs_[out.offset(oidx)] += probs_[off];
  }
  return out;
}

void ApproxPosterior::check() const {
  for (long r = 0; r < table.rows(); ++r) {
    double s = 0.0;
    for (long c = 0; c < table.cols(); ++c) {
      if (table(r, c) < 0.0) throw Error("posterior: negative entry");
      s += table(r, c);
    }
    if (std::abs(s - 1.0) > 1e-12) throw Error("posterior: row does not sum to 1");
  }
}

namespace {

// composite index of `axes` inside a full-joint index
struct CompositeAxis {
  std::vector<int> axis_ids;
  std::vector<int> sizes;
  long total = 1;

  CompositeAxis(const DiscreteJoint& j, const std::vector<std::string>& axes) {
    for (const auto& a : axes) {
      axis_ids.push_back(j.axis(a));
      sizes.push_back(j.sizes()[static_cast<size_t>(j.axis(a))]);
      total *= sizes.back();
    }
  }
  long value(const std::vector<int>& idx) const {
    long v = 0;
    for (size_t i = 0; i < axis_ids.size(); ++i)
      v = v * sizes[i] + idx[static_cast<size_t>(axis_ids[i])];
    return v;
  }
};

}  // namespace

double exact_mi(const DiscreteJoint& joint, const std::vector<std::string>& x_axes,
                const std::vector<std::string>& y_axes,
                const std::vector<std::string>& cond_axes) {
  CompositeAxis X(joint, x_axes), Y(joint, y_axes), C(joint, cond_axes);
  Eigen::MatrixXd p_xyc = Eigen::MatrixXd::Zero(X.total * Y.total, std::max<long>(C.total, 1));
  Eigen::MatrixXd p_xc = Eigen::MatrixXd::Zero(X.total, std::max<long>(C.total, 1));
  Eigen::MatrixXd p_yc = Eigen::MatrixXd::Zero(Y.total, std::max<long>(C.total, 1));
  Eigen::VectorXd p_c = Eigen::VectorXd::Zero(std::max<long>(C.total, 1));

  std::vector<int> idx;
  for (size_t off = 0; off < joint.raw().size(); ++off) {
    const double p = joint.raw()[off];
    if (p == 0.0) continue;
    joint.unravel(off, idx);
    const long xi = X.value(idx), yi = Y.value(idx), ci = C.value(idx);
    p_xyc(xi * Y.total + yi, ci) += p;
    p_xc(xi, ci) += p;
    p_yc(yi, ci) += p;
    p_c(ci) += p;
  }

  double mi = 0.0;
  for (long xi = 0; xi < X.total; ++xi)
    for (long yi = 0; yi < Y.total; ++yi)
      for (long ci = 0; ci < p_c.size(); ++ci) {
        const double p = p_xyc(xi * Y.total + yi, ci);
        if (p <= 0.0) continue;
        mi += p * std::log(p * p_c(ci) / (p_xc(xi, ci) * p_yc(yi, ci)));
      }
  return mi;
}

Decomposition decompose_mi(const DiscreteJoint& joint) {
  // H(z_y | t_y)
  DiscreteJoint m_tz = joint.marginal({"t_y", "z_y"});
  DiscreteJoint m_t = joint.marginal({"t_y"});
  double entropy = 0.0;
  {
    std::vector<int> idx;
    for (size_t off = 0; off < m_tz.raw().size(); ++off) {
      const double p = m_tz.raw()[off];
      if (p <= 0.0) continue;
      m_tz.unravel(off, idx);
      entropy -= xlogy(p, p / m_t.raw()[static_cast<size_t>(idx[0])]);
    }
  }

  // E[ H(p(z_y|y), p(z_y | z_x, t_x, t_y)) ] over the full joint
  DiscreteJoint m_all = joint.marginal({"z_x", "t_x", "t_y", "z_y"});
  DiscreteJoint m_cond = joint.marginal({"z_x", "t_x", "t_y"});
  double cross = 0.0;
  {
    std::vector<int> idx;
    for (size_t off = 0; off < joint.raw().size(); ++off) {
      const double p = joint.raw()[off];
      if (p <= 0.0) continue;
      joint.unravel(off, idx);
      std::vector<int> a4 = {idx[static_cast<size_t>(joint.axis("z_x"))],
                             idx[static_cast<size_t>(joint.axis("t_x"))],
                             idx[static_cast<size_t>(joint.axis("t_y"))],
                             idx[static_cast<size_t>(joint.axis("z_y"))]};
      const double num = m_all.at(a4);
      const double den = m_cond.at({a4[0], a4[1], a4[2]});
      cross -= p * std::log(num / den);
    }
  }
  return Decomposition{entropy, cross, entropy - cross};
}

namespace {

double grouped_entropy_term(const DiscreteJoint& joint,
                            const std::vector<std::string>& target_axes) {
  std::vector<std::string> axes = {"t_y"};
  axes.insert(axes.end(), target_axes.begin(), target_axes.end());
  DiscreteJoint m = joint.marginal(axes);
  DiscreteJoint m_t = joint.marginal({"t_y"});
  double h = 0.0;
  std::vector<int> idx;
  for (size_t off = 0; off < m.raw().size(); ++off) {
    const double p = m.raw()[off];
    if (p <= 0.0) continue;
    m.unravel(off, idx);
    h -= xlogy(p, p / m_t.raw()[static_cast<size_t>(idx[0])]);
  }
  return h;
}

long posterior_row(const DiscreteJoint& joint, const std::vector<int>& idx) {
  const int zx = idx[static_cast<size_t>(joint.axis("z_x"))];
  const int tx = idx[static_cast<size_t>(joint.axis("t_x"))];
  const int ty = idx[static_cast<size_t>(joint.axis("t_y"))];
  return (static_cast<long>(zx) * joint.size("t_x") + tx) * joint.size("t_y") + ty;
}

}  // namespace

double grouped_bound(const DiscreteJoint& joint, const std::vector<std::string>& target_axes,
                     const std::vector<ApproxPosterior>& q_list) {
  if (target_axes.empty() || target_axes.size() != q_list.size())
    throw PartitionViolation("grouped_bound: one posterior per target group");
  double bound = grouped_entropy_term(joint, target_axes);
  std::vector<int> idx;
  for (size_t k = 0; k < target_axes.size(); ++k) {
    const int axis_id = joint.axis(target_axes[k]);
    const ApproxPosterior& q = q_list[k];
    for (size_t off = 0; off < joint.raw().size(); ++off) {
      const double p = joint.raw()[off];
      if (p <= 0.0) continue;
      joint.unravel(off, idx);
      bound += p * std::log(q.table(posterior_row(joint, idx), idx[static_cast<size_t>(axis_id)]));
    }
  }
  return bound;
}

double variational_bound(const DiscreteJoint& joint, const ApproxPosterior& q) {
  return grouped_bound(joint, {"z_y"}, {q});
}

ApproxPosterior bayes_posterior(const DiscreteJoint& joint,
                                const std::vector<std::string>& target_axes) {
  CompositeAxis T(joint, target_axes);
  const long rows = static_cast<long>(joint.size("z_x")) * joint.size("t_x") * joint.size("t_y");
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(rows, T.total);
  std::vector<int> idx;
  for (size_t off = 0; off < joint.raw().size(); ++off) {
    const double p = joint.raw()[off];
    if (p == 0.0) continue;
    joint.unravel(off, idx);
    table(posterior_row(joint, idx), T.value(idx)) += p;
  }
  for (long r = 0; r < rows; ++r) {
    const double s = table.row(r).sum();
    if (s > 0.0)
      table.row(r) /= s;
    else
      table.row(r).setConstant(1.0 / static_cast<double>(T.total));
  }
  ApproxPosterior q{std::move(table)};
  return q;
}

ApproxPosterior uniform_posterior(const DiscreteJoint& joint,
                                  const std::vector<std::string>& target_axes) {
  CompositeAxis T(joint, target_axes);
  const long rows = static_cast<long>(joint.size("z_x")) * joint.size("t_x") * joint.size("t_y");
  ApproxPosterior q;
  q.table = Eigen::MatrixXd::Constant(rows, T.total, 1.0 / static_cast<double>(T.total));
  return q;
}

SupremumResult check_supremum(const DiscreteJoint& joint, uint64_t seed) {
  std::vector<std::string> target_axes;
  for (const auto& n : joint.names())
    if (n.rfind("z_y", 0) == 0) target_axes.push_back(n);
  for (int s : joint.sizes())
    if (s > 8) throw OptimizationBudgetExceeded("supremum search expects supports <= 8");

  const double mi = exact_mi(joint, {"z_x"}, target_axes, {"t_x", "t_y"});
  CompositeAxis T(joint, target_axes);
  const long rows = static_cast<long>(joint.size("z_x")) * joint.size("t_x") * joint.size("t_y");
  const long cols = T.total;

  // per-row target posteriors and row weights
  ApproxPosterior bayes = bayes_posterior(joint, target_axes);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(rows);
  {
    std::vector<int> idx;
    for (size_t off = 0; off < joint.raw().size(); ++off) {
      if (joint.raw()[off] == 0.0) continue;
      joint.unravel(off, idx);
      w(posterior_row(joint, idx)) += joint.raw()[off];
    }
  }

  Rng rng(hash_combine(seed, 0x5f9u));
  const int kSteps = 500;
  const double kStep = 0.5;
  double best = -1e300;
  for (int restart = 0; restart < 3; ++restart) {
    Eigen::MatrixXd theta(rows, cols);
    if (restart == 0) {
      theta.setZero();
    } else if (restart == 1) {
      for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c) theta(r, c) = rng.normal();
    } else {
      // warm start at the closed-form optimum (the Bayes posterior)
      theta = (bayes.table.array() + 1e-12).log();
    }
    Eigen::MatrixXd q(rows, cols);
    for (int step = 0; step <= kSteps; ++step) {
      for (long r = 0; r < rows; ++r) {
        const double m = theta.row(r).maxCoeff();
        Eigen::ArrayXd e = (theta.row(r).array() - m).exp();
        q.row(r) = (e / e.sum()).matrix();
      }
      if (step == kSteps) break;
      theta += kStep * (bayes.table - q);
    }
    ApproxPosterior cand{q};
    best = std::max(best, grouped_bound(joint, target_axes, std::vector<ApproxPosterior>(
                                                                target_axes.size(), cand)));
    if (target_axes.size() > 1) {
      // per-group candidates: marginalize the composite rows
      std::vector<ApproxPosterior> qs;
      long stride = cols;
      for (size_t k = 0; k < target_axes.size(); ++k) {
        const int sz = joint.size(target_axes[k]);
        stride /= sz;
        Eigen::MatrixXd tk = Eigen::MatrixXd::Zero(rows, sz);
        for (long c = 0; c < cols; ++c) tk.col((c / stride) % sz) += q.col(c);
        qs.push_back(ApproxPosterior{tk});
      }
      best = std::max(best, grouped_bound(joint, target_axes, qs));
    }
  }
  return SupremumResult{mi, best, mi - best};
}

DiscreteJoint random_factorized_joint(Rng& rng, int max_support, int target_groups) {
  auto draw_size = [&](int lo, int hi) { return rng.uniform_int(lo, std::min(hi, max_support)); };
  const int ns = draw_size(2, 4);
  const int ntx = draw_size(1, 3);
  const int nty = draw_size(1, 3);
  const int nzx = draw_size(2, 4);
  std::vector<int> nzy(static_cast<size_t>(target_groups));
  for (auto& n : nzy) n = draw_size(2, 4);

  auto simplex = [&](int n, std::vector<double>& out) {
    out.resize(static_cast<size_t>(n));
    double s = 0.0;
    for (double& v : out) {
      v = -std::log(std::max(rng.uniform(), 1e-300));
      s += v;
    }
    // occasionally zero an entry to exercise 0 log 0 handling
    if (n > 1 && rng.bernoulli(0.25)) {
      const size_t z = rng.uniform_int(static_cast<uint64_t>(n));
      s -= out[z];
      out[z] = 0.0;
    }
    for (double& v : out) v /= s;
  };

  std::vector<double> ps, ptx, pty;
  simplex(ns, ps);
  simplex(ntx, ptx);
  simplex(nty, pty);

  // conditional tables
  std::vector<std::vector<double>> pzx(static_cast<size_t>(ns * ntx));
  for (auto& row : pzx) simplex(nzx, row);
  std::vector<std::vector<std::vector<double>>> pzy(static_cast<size_t>(target_groups));
  for (int k = 0; k < target_groups; ++k) {
    pzy[static_cast<size_t>(k)].resize(static_cast<size_t>(ns * nty));
    for (auto& row : pzy[static_cast<size_t>(k)]) simplex(nzy[static_cast<size_t>(k)], row);
  }

  std::vector<std::string> names = {"s", "t_x", "t_y", "z_x"};
  std::vector<int> sizes = {ns, ntx, nty, nzx};
  if (target_groups == 1) {
    names.push_back("z_y");
    sizes.push_back(nzy[0]);
  } else {
    for (int k = 0; k < target_groups; ++k) {
      names.push_back("z_y" + std::to_string(k + 1));
      sizes.push_back(nzy[static_cast<size_t>(k)]);
    }
  }
  DiscreteJoint j(names, sizes);
  std::vector<int> idx(names.size());
  std::function<void(size_t, double)> fill = [&](size_t axis, double acc) {
    if (acc == 0.0) return;
    if (axis == names.size()) {
      j.at(idx) = acc;
      return;
    }
    const int n = sizes[axis];
    for (int v = 0; v < n; ++v) {
      idx[axis] = v;
      double f = 1.0;
      if (axis == 0) f = ps[static_cast<size_t>(v)];
      else if (axis == 1) f = ptx[static_cast<size_t>(v)];
      else if (axis == 2) f = pty[static_cast<size_t>(v)];
      else if (axis == 3) f = pzx[static_cast<size_t>(idx[0] * ntx + idx[1])][static_cast<size_t>(v)];
      else f = pzy[axis - 4][static_cast<size_t>(idx[0] * nty + idx[2])][static_cast<size_t>(v)];
      fill(axis + 1, acc * f);
    }
  };
  fill(0, 1.0);
  j.check();
  return j;
}

DiscreteJoint coarsen_axis(const DiscreteJoint& joint, const std::string& axis,
                           const std::vector<int>& merge_to, int new_size) {
  const int a = joint.axis(axis);
  std::vector<int> sizes = joint.sizes();
  if (static_cast<int>(merge_to.size()) != sizes[static_cast<size_t>(a)])
    throw ShapeMismatch("coarsen_axis: merge map size");
  sizes[static_cast<size_t>(a)] = new_size;
  DiscreteJoint out(joint.names(), sizes);
  std::vector<int> idx;
  for (size_t off = 0; off < joint.raw().size(); ++off) {
    const double p = joint.raw()[off];
    if (p == 0.0) continue;
    joint.unravel(off, idx);
    idx[static_cast<size_t>(a)] = merge_to[static_cast<size_t>(idx[static_cast<size_t>(a)])];
    out.at(idx) += p;
  }
  return out;
}

bool run_oracle_suite(uint64_t seed, int trials, std::ostream& os) {
  bool all_ok = true;
  auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    os << (ok ? "[PASS] " : "[FAIL] ") << name << "  " << detail << "\n";
    all_ok = all_ok && ok;
  };

  Rng rng(seed);
  {
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
      DiscreteJoint j = random_factorized_joint(rng, 8);
      const double mi = exact_mi(j, {"z_x"}, {"z_y"}, {"t_x", "t_y"});
      const Decomposition d = decompose_mi(j);
      worst = std::max(worst, std::abs(mi - d.mi));
    }
    report("eq1 decomposition: mi == entropy - cross-entropy", worst < 1e-9,
           "max |diff| = " + std::to_string(worst) + " over " + std::to_string(trials) + " joints");
  }
  {
    double worst_excess = -1e300;
    int n = std::max(trials * 10, 1000);
    for (int t = 0; t < n; ++t) {
      DiscreteJoint j = random_factorized_joint(rng, 6);
      const double mi = exact_mi(j, {"z_x"}, {"z_y"}, {"t_x", "t_y"});
      ApproxPosterior q = uniform_posterior(j, {"z_y"});
      if (t % 2 == 0) {
        for (long r = 0; r < q.table.rows(); ++r) {
          double s = 0.0;
          for (long c = 0; c < q.table.cols(); ++c) {
            q.table(r, c) = -std::log(std::max(rng.uniform(), 1e-300));
            s += q.table(r, c);
          }
          q.table.row(r) /= s;
        }
      }
      worst_excess = std::max(worst_excess, variational_bound(j, q) - mi);
    }
    report("eq2 variational bound never exceeds mi", worst_excess <= 1e-10,
           "max bound - mi = " + std::to_string(worst_excess) + " over " + std::to_string(n) +
               " fuzzed pairs");
  }
  {
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
      DiscreteJoint j = random_factorized_joint(rng, 6);
      const double mi = exact_mi(j, {"z_x"}, {"z_y"}, {"t_x", "t_y"});
      const double b = variational_bound(j, bayes_posterior(j, {"z_y"}));
      worst = std::max(worst, std::abs(b - mi));
    }
    report("eq2 equality at the Bayes posterior", worst < 1e-9,
           "max |bound - mi| = " + std::to_string(worst));
  }
  {
    double worst_gap = -1e300, worst_neg = 1e300;
    for (int t = 0; t < 20; ++t) {
      DiscreteJoint j = random_factorized_joint(rng, 6);
      SupremumResult r = check_supremum(j, hash_combine(seed, static_cast<uint64_t>(t)));
      worst_gap = std::max(worst_gap, r.gap);
      worst_neg = std::min(worst_neg, r.gap);
    }
    report("eq2 supremum attained numerically", worst_gap <= 1e-4 && worst_neg >= -1e-9,
           "gap range [" + std::to_string(worst_neg) + ", " + std::to_string(worst_gap) + "]");
  }
  {
    double worst_excess = -1e300;
    const int n = std::max(trials * 2, 200);
    for (int t = 0; t < n; ++t) {
      DiscreteJoint j = random_factorized_joint(rng, 4, 2);
      const double mi = exact_mi(j, {"z_x"}, {"z_y1", "z_y2"}, {"t_x", "t_y"});
      std::vector<ApproxPosterior> qs = {bayes_posterior(j, {"z_y1"}),
                                         bayes_posterior(j, {"z_y2"})};
      if (t % 2 == 1) {
        qs[0] = uniform_posterior(j, {"z_y1"});
        qs[1] = uniform_posterior(j, {"z_y2"});
      }
      worst_excess = std::max(worst_excess, grouped_bound(j, {"z_y1", "z_y2"}, qs) - mi);
    }
    report("eq4 grouped bound never exceeds joint mi", worst_excess <= 1e-10,
           "max bound - mi = " + std::to_string(worst_excess) + " over " + std::to_string(n));
  }
  {
    bool ok = true;
    for (int t = 0; t < 20; ++t) {
      DiscreteJoint j = random_factorized_joint(rng, 6);
      ApproxPosterior q = bayes_posterior(j, {"z_y"});
      ok = ok && grouped_bound(j, {"z_y"}, {q}) == variational_bound(j, q);
    }
    report("eq4 reduces to eq2 for a single group (bit-exact)", ok, "");
  }
  {
    // independent groups: z_x reveals s, each group depends on its own half
    DiscreteJoint j({"s", "t_x", "t_y", "z_x", "z_y1", "z_y2"}, {4, 1, 1, 4, 2, 2});
    Rng r2(hash_combine(seed, 7));
    std::vector<std::vector<double>> ch1(4), ch2(4);
    for (int s = 0; s < 4; ++s) {
      const double e1 = 0.1 + 0.2 * r2.uniform();
      const double e2 = 0.1 + 0.2 * r2.uniform();
      const int b1 = s / 2, b2 = s % 2;
      ch1[static_cast<size_t>(s)] = {b1 == 0 ? 1 - e1 : e1, b1 == 0 ? e1 : 1 - e1};
      ch2[static_cast<size_t>(s)] = {b2 == 0 ? 1 - e2 : e2, b2 == 0 ? e2 : 1 - e2};
    }
    for (int s = 0; s < 4; ++s)
      for (int zy1 = 0; zy1 < 2; ++zy1)
        for (int zy2 = 0; zy2 < 2; ++zy2)
          j.at({s, 0, 0, s, zy1, zy2}) = 0.25 * ch1[static_cast<size_t>(s)][static_cast<size_t>(zy1)] *
                                         ch2[static_cast<size_t>(s)][static_cast<size_t>(zy2)];
    j.check();
    const double mi = exact_mi(j, {"z_x"}, {"z_y1", "z_y2"}, {"t_x", "t_y"});
    const double b = grouped_bound(j, {"z_y1", "z_y2"},
                                   {bayes_posterior(j, {"z_y1"}), bayes_posterior(j, {"z_y2"})});
    report("eq4 equality for independent target groups", std::abs(b - mi) < 1e-9,
           "|bound - mi| = " + std::to_string(std::abs(b - mi)));
  }
  {
    double worst = 0.0, most_negative = 0.0, worst_dpi = -1e300;
    for (int t = 0; t < trials; ++t) {
      DiscreteJoint j = random_factorized_joint(rng, 6);
      const double a = exact_mi(j, {"z_x"}, {"z_y"}, {"t_x", "t_y"});
      const double b = exact_mi(j, {"z_y"}, {"z_x"}, {"t_x", "t_y"});
      worst = std::max(worst, std::abs(a - b));
      most_negative = std::min(most_negative, a);
      const int nzy = j.size("z_y");
      if (nzy > 2) {
        std::vector<int> merge(static_cast<size_t>(nzy));
        for (int i = 0; i < nzy; ++i) merge[static_cast<size_t>(i)] = std::min(i, nzy - 2);
        DiscreteJoint cj = coarsen_axis(j, "z_y", merge, nzy - 1);
        worst_dpi = std::max(worst_dpi,
                             exact_mi(cj, {"z_x"}, {"z_y"}, {"t_x", "t_y"}) - a);
      }
    }
    report("mi symmetry / non-negativity / data-processing",
           worst < 1e-10 && most_negative >= -1e-12 && worst_dpi <= 1e-12,
           "sym " + std::to_string(worst) + ", min mi " + std::to_string(most_negative) +
               ", max coarsening gain " + std::to_string(worst_dpi));
  }
  return all_ok;
}

}  // namespace m3i::oracle
