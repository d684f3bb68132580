// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/ad/ad.hpp"

#include <cmath>
#include <unordered_set>

#include "m3i/error.hpp"

namespace m3i::ad {

namespace {

std::shared_ptr<Node> make_node(Matrix v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

bool any_grad(std::initializer_list<const Var*> vars) {
  for (const Var* v : vars)
    if (v->requires_grad()) return true;
  return false;
}

void accum(Node& parent, const Matrix& g) {
  if (parent.requires_grad) parent.grad += g;
}

// Builds an op node; `backprop` may assume all parents with requires_grad
// have zeroed grads of the right shape.
Var make_op(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  auto n = make_node(std::move(value));
  bool rg = false;
  for (const auto& p : parents) {
    n->parents.push_back(p.node());
    rg = rg || p.requires_grad();
  }
  n->requires_grad = rg;
  if (rg) n->backprop = std::move(backprop);
  return Var(n);
}

}  // namespace

Var constant(Matrix v) { return Var(make_node(std::move(v))); }

Var scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var leaf(Matrix v, bool requires_grad) {
  auto n = make_node(std::move(v));
  n->requires_grad = requires_grad;
  return Var(n);
}

void backward(const Var& root, const Matrix& seed) {
  if (!root.requires_grad()) return;
  if (seed.rows() != root.rows() || seed.cols() != root.cols())
    throw ShapeMismatch("backward seed shape");

  // Post-order DFS through requires_grad edges.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame { Node* n; size_t next_parent; };
  std::vector<Frame> stack;
  stack.push_back({root.node().get(), 0});
  visited.insert(root.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.n->parents.size()) {
      Node* p = f.n->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  for (Node* n : order) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
  root.node()->grad = seed;
  // Reverse post-order: every node is processed after all its consumers.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

void backward(const Var& root) {
  backward(root, Matrix::Ones(root.rows(), root.cols()));
}

Var detach(const Var& x) { return constant(x.value()); }

Var add(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeMismatch("add");
  return make_op(a.value() + b.value(), {a, b}, [](Node& n) {
    accum(*n.parents[0], n.grad);
    accum(*n.parents[1], n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeMismatch("sub");
  return make_op(a.value() - b.value(), {a, b}, [](Node& n) {
    accum(*n.parents[0], n.grad);
    accum(*n.parents[1], -n.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeMismatch("mul");
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    accum(*n.parents[0], n.grad.cwiseProduct(n.parents[1]->value));
    accum(*n.parents[1], n.grad.cwiseProduct(n.parents[0]->value));
  });
}

Var scalar_mul(const Var& a, double c) {
  return make_op(a.value() * c, {a}, [c](Node& n) { accum(*n.parents[0], n.grad * c); });
}

Var add_scalar(const Var& a, double c) {
  return make_op(a.value().array() + c, {a}, [](Node& n) { accum(*n.parents[0], n.grad); });
}

Var neg(const Var& a) { return scalar_mul(a, -1.0); }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ShapeMismatch("matmul");
  return make_op(a.value() * b.value(), {a, b}, [](Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    if (a.requires_grad) a.grad.noalias() += n.grad * b.value.transpose();
    if (b.requires_grad) b.grad.noalias() += a.value.transpose() * n.grad;
  });
}

Var transpose(const Var& a) {
  return make_op(a.value().transpose(), {a},
                 [](Node& n) { accum(*n.parents[0], n.grad.transpose()); });
}

Var add_rowvec(const Var& x, const Var& v) {
  if (v.rows() != 1 || v.cols() != x.cols()) throw ShapeMismatch("add_rowvec");
  Matrix out = x.value();
  out.rowwise() += v.value().row(0);
  return make_op(std::move(out), {x, v}, [](Node& n) {
    accum(*n.parents[0], n.grad);
    if (n.parents[1]->requires_grad) n.parents[1]->grad += n.grad.colwise().sum();
  });
}

Var mul_rowvec(const Var& x, const Var& v) {
  if (v.rows() != 1 || v.cols() != x.cols()) throw ShapeMismatch("mul_rowvec");
  Matrix out = x.value().array().rowwise() * v.value().row(0).array();
  return make_op(std::move(out), {x, v}, [](Node& n) {
    Node& x = *n.parents[0];
    Node& v = *n.parents[1];
    if (x.requires_grad)
      x.grad.array() += n.grad.array().rowwise() * v.value.row(0).array();
    if (v.requires_grad)
      v.grad += (n.grad.cwiseProduct(x.value)).colwise().sum();
  });
}

Var broadcast_rows(const Var& v, int n) {
  if (v.rows() != 1) throw ShapeMismatch("broadcast_rows expects 1xD");
  return make_op(v.value().replicate(n, 1), {v}, [](Node& nd) {
    if (nd.parents[0]->requires_grad) nd.parents[0]->grad += nd.grad.colwise().sum();
  });
}

Var gelu(const Var& x) {
  const double inv_sqrt2 = 0.7071067811865475244;
  const double inv_sqrt2pi = 0.3989422804014326779;
  Matrix out = x.value().unaryExpr(
      [&](double t) { return 0.5 * t * (1.0 + std::erf(t * inv_sqrt2)); });
  return make_op(std::move(out), {x}, [inv_sqrt2, inv_sqrt2pi](Node& n) {
    Node& x = *n.parents[0];
    if (!x.requires_grad) return;
    Matrix d = x.value.unaryExpr([&](double t) {
      return 0.5 * (1.0 + std::erf(t * inv_sqrt2)) + t * inv_sqrt2pi * std::exp(-0.5 * t * t);
    });
    x.grad += n.grad.cwiseProduct(d);
  });
}

Var cw_sqrt(const Var& x) {
  Matrix out = x.value().cwiseSqrt();
  return make_op(std::move(out), {x}, [](Node& n) {
    Node& x = *n.parents[0];
    if (!x.requires_grad) return;
    Matrix d = n.value.unaryExpr([](double s) { return s > 1e-300 ? 0.5 / s : 0.0; });
    x.grad += n.grad.cwiseProduct(d);
  });
}

Var cw_reciprocal(const Var& x) {
  Matrix out = x.value().cwiseInverse();
  return make_op(std::move(out), {x}, [](Node& n) {
    Node& x = *n.parents[0];
    if (!x.requires_grad) return;
    x.grad -= n.grad.cwiseProduct(n.value.cwiseProduct(n.value));
  });
}

Var cw_max_const(const Var& x, double c) {
  Matrix out = x.value().cwiseMax(c);
  return make_op(std::move(out), {x}, [c](Node& n) {
    Node& x = *n.parents[0];
    if (!x.requires_grad) return;
    Matrix pass = (x.value.array() > c).cast<double>();
    x.grad += n.grad.cwiseProduct(pass);
  });
}

Var cw_exp(const Var& x) {
  Matrix out = x.value().array().exp();
  return make_op(std::move(out), {x}, [](Node& n) {
    accum(*n.parents[0], n.grad.cwiseProduct(n.value));
  });
}

Var cw_log(const Var& x) {
  Matrix out = x.value().array().log();
  return make_op(std::move(out), {x}, [](Node& n) {
    accum(*n.parents[0], n.grad.cwiseQuotient(n.parents[0]->value));
  });
}

Var sum_all(const Var& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return make_op(std::move(out), {x}, [](Node& n) {
    Node& x = *n.parents[0];
    if (x.requires_grad) x.grad.array() += n.grad(0, 0);
  });
}

Var mean_all(const Var& x) {
  const double inv = 1.0 / static_cast<double>(x.rows() * x.cols());
  Matrix out(1, 1);
  out(0, 0) = x.value().sum() * inv;
  return make_op(std::move(out), {x}, [inv](Node& n) {
    Node& x = *n.parents[0];
    if (x.requires_grad) x.grad.array() += n.grad(0, 0) * inv;
  });
}

Var mean_rows(const Var& x) {
  const double inv = 1.0 / static_cast<double>(x.rows());
  Matrix out = x.value().colwise().sum() * inv;
  return make_op(std::move(out), {x}, [inv](Node& n) {
    Node& x = *n.parents[0];
    if (x.requires_grad) x.grad += (n.grad * inv).replicate(x.value.rows(), 1);
  });
}

Var sum_rows(const Var& x) {
  Matrix out = x.value().colwise().sum();
  return make_op(std::move(out), {x}, [](Node& n) {
    Node& x = *n.parents[0];
    if (x.requires_grad) x.grad += n.grad.replicate(x.value.rows(), 1);
  });
}

Var gather_rows(const Var& x, const std::vector<int>& idx) {
  Matrix out(static_cast<long>(idx.size()), x.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= x.rows()) throw ShapeMismatch("gather_rows index");
    out.row(static_cast<long>(i)) = x.value().row(idx[i]);
  }
  return make_op(std::move(out), {x}, [idx](Node& n) {
    Node& x = *n.parents[0];
    if (!x.requires_grad) return;
    for (size_t i = 0; i < idx.size(); ++i)
      x.grad.row(idx[i]) += n.grad.row(static_cast<long>(i));
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: empty");
  long rows = 0;
  const long cols = parts[0].cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeMismatch("concat_rows cols");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  long r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_op(std::move(out), parts, [](Node& n) {
    long r = 0;
    for (auto& p : n.parents) {
      if (p->requires_grad) p->grad += n.grad.middleRows(r, p->value.rows());
      r += p->value.rows();
    }
  });
}

Var select_rows_merge(const Var& a, const Var& b, const std::vector<uint8_t>& flags) {
  if (a.rows() != b.rows() || a.cols() != b.cols() ||
      static_cast<long>(flags.size()) != a.rows())
    throw ShapeMismatch("select_rows_merge");
  Matrix out(a.rows(), a.cols());
  for (long i = 0; i < a.rows(); ++i)
    out.row(i) = flags[static_cast<size_t>(i)] ? a.value().row(i) : b.value().row(i);
  return make_op(std::move(out), {a, b}, [flags](Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    for (long i = 0; i < n.value.rows(); ++i) {
      if (flags[static_cast<size_t>(i)]) {
        if (a.requires_grad) a.grad.row(i) += n.grad.row(i);
      } else {
        if (b.requires_grad) b.grad.row(i) += n.grad.row(i);
      }
    }
  });
}

namespace {
Matrix softmax_rows_stable(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (long i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    Eigen::ArrayXd e = (x.row(i).array() - m).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  return out;
}
}  // namespace

Var row_softmax(const Var& x) {
  Matrix p = softmax_rows_stable(x.value());
  return make_op(p, {x}, [](Node& n) {
    Node& x = *n.parents[0];
    if (!x.requires_grad) return;
    const Matrix& p = n.value;
    for (long i = 0; i < p.rows(); ++i) {
      const double dot = n.grad.row(i).dot(p.row(i));
      x.grad.row(i) += (n.grad.row(i).array() - dot).matrix().cwiseProduct(p.row(i));
    }
  });
}

Var row_log_softmax(const Var& x) {
  Matrix out(x.rows(), x.cols());
  for (long i = 0; i < x.rows(); ++i) {
    const double m = x.value().row(i).maxCoeff();
    const double lse = m + std::log((x.value().row(i).array() - m).exp().sum());
    out.row(i) = x.value().row(i).array() - lse;
  }
  return make_op(std::move(out), {x}, [](Node& n) {
    Node& x = *n.parents[0];
    if (!x.requires_grad) return;
    for (long i = 0; i < n.value.rows(); ++i) {
      const double s = n.grad.row(i).sum();
      x.grad.row(i) += n.grad.row(i) - s * n.value.row(i).array().exp().matrix();
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const long R = x.rows(), C = x.cols();
  if (gain.rows() != 1 || gain.cols() != C || bias.rows() != 1 || bias.cols() != C)
    throw ShapeMismatch("layer_norm params");
  Matrix xhat(R, C);
  Eigen::ArrayXd inv_std(R);
  for (long i = 0; i < R; ++i) {
    const double mu = x.value().row(i).mean();
    const double var = (x.value().row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.value().row(i).array() - mu) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
               bias.value().row(0).array();
  auto xhat_p = std::make_shared<Matrix>(std::move(xhat));
  auto istd_p = std::make_shared<Eigen::ArrayXd>(std::move(inv_std));
  return make_op(std::move(out), {x, gain, bias}, [xhat_p, istd_p](Node& n) {
    Node& x = *n.parents[0];
    Node& g = *n.parents[1];
    Node& b = *n.parents[2];
    const Matrix& xh = *xhat_p;
    if (g.requires_grad) g.grad += n.grad.cwiseProduct(xh).colwise().sum();
    if (b.requires_grad) b.grad += n.grad.colwise().sum();
    if (x.requires_grad) {
      const long C = xh.cols();
      for (long i = 0; i < xh.rows(); ++i) {
        Eigen::RowVectorXd dy = n.grad.row(i).cwiseProduct(g.value.row(0));
        const double m1 = dy.mean();
        const double m2 = dy.cwiseProduct(xh.row(i)).mean();
        x.grad.row(i) +=
            ((dy.array() - m1 - xh.row(i).array() * m2) * (*istd_p)(i)).matrix();
        (void)C;
      }
    }
  });
}

Var l2_normalize_rows(const Var& x, double eps) {
  const long R = x.rows();
  Matrix out(R, x.cols());
  Eigen::ArrayXd r(R);
  for (long i = 0; i < R; ++i) {
    const double nrm = x.value().row(i).norm();
    r(i) = std::max(nrm, eps);
    out.row(i) = x.value().row(i) / r(i);
  }
  auto r_p = std::make_shared<Eigen::ArrayXd>(std::move(r));
  return make_op(std::move(out), {x}, [r_p, eps](Node& n) {
    Node& x = *n.parents[0];
    if (!x.requires_grad) return;
    for (long i = 0; i < n.value.rows(); ++i) {
      const double ri = (*r_p)(i);
      const double raw = x.value.row(i).norm();
      if (raw > eps) {
        const double dot = n.grad.row(i).dot(n.value.row(i));
        x.grad.row(i) += (n.grad.row(i) - dot * n.value.row(i)) / ri;
      } else {
        x.grad.row(i) += n.grad.row(i) / eps;
      }
    }
  });
}

Var sdpa(const Var& q, const Var& k, const Var& v, int heads, int nq, int nk) {
  const long D = q.cols();
  if (k.cols() != D || v.cols() != D) throw ShapeMismatch("sdpa dims");
  if (q.rows() % nq != 0 || k.rows() % nk != 0 || v.rows() != k.rows())
    throw ShapeMismatch("sdpa rows");
  const long B = q.rows() / nq;
  if (k.rows() / nk != B) throw ShapeMismatch("sdpa batch");
  if (D % heads != 0) throw ShapeMismatch("sdpa heads");
  const long dh = D / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(static_cast<size_t>(B * heads));
  Matrix out = Matrix::Zero(q.rows(), D);
  for (long b = 0; b < B; ++b) {
    for (int h = 0; h < heads; ++h) {
      auto Qh = q.value().block(b * nq, h * dh, nq, dh);
      auto Kh = k.value().block(b * nk, h * dh, nk, dh);
      auto Vh = v.value().block(b * nk, h * dh, nk, dh);
      Matrix S = (Qh * Kh.transpose()) * scale;
      Matrix P = softmax_rows_stable(S);
      out.block(b * nq, h * dh, nq, dh).noalias() = P * Vh;
      probs->push_back(std::move(P));
    }
  }
  return make_op(std::move(out), {q, k, v},
                 [probs, heads, nq, nk, dh, scale](Node& n) {
    Node& q = *n.parents[0];
    Node& k = *n.parents[1];
    Node& v = *n.parents[2];
    const long B = q.value.rows() / nq;
    size_t pi = 0;
    for (long b = 0; b < B; ++b) {
      for (int h = 0; h < heads; ++h) {
        const Matrix& P = (*probs)[pi++];
        auto Qh = q.value.block(b * nq, h * dh, nq, dh);
        auto Kh = k.value.block(b * nk, h * dh, nk, dh);
        auto Vh = v.value.block(b * nk, h * dh, nk, dh);
        auto dO = n.grad.block(b * nq, h * dh, nq, dh);
        if (v.requires_grad)
          v.grad.block(b * nk, h * dh, nk, dh).noalias() += P.transpose() * dO;
        if (q.requires_grad || k.requires_grad) {
          Matrix dP = dO * Vh.transpose();
          Matrix dS(nq, nk);
          for (long i = 0; i < nq; ++i) {
            const double dot = dP.row(i).dot(P.row(i));
            dS.row(i) = (dP.row(i).array() - dot).matrix().cwiseProduct(P.row(i)) * scale;
          }
          if (q.requires_grad)
            q.grad.block(b * nq, h * dh, nq, dh).noalias() += dS * Kh;
          if (k.requires_grad)
            k.grad.block(b * nk, h * dh, nk, dh).noalias() += dS.transpose() * Qh;
        }
      }
    }
  });
}

Var nll_index(const Var& logp, const std::vector<int>& targets, double label_smoothing) {
  const long R = logp.rows(), C = logp.cols();
  if (static_cast<long>(targets.size()) != R) throw ShapeMismatch("nll_index targets");
  const double e = label_smoothing;
  double loss = 0.0;
  for (long i = 0; i < R; ++i) {
    const int t = targets[static_cast<size_t>(i)];
    if (t < 0 || t >= C) throw ShapeMismatch("nll_index target range");
    loss += -(1.0 - e) * logp.value()(i, t) - (e / C) * logp.value().row(i).sum();
  }
  Matrix out(1, 1);
  out(0, 0) = loss / R;
  return make_op(std::move(out), {logp}, [targets, e](Node& n) {
    Node& lp = *n.parents[0];
    if (!lp.requires_grad) return;
    const long R = lp.value.rows(), C = lp.value.cols();
    const double g = n.grad(0, 0) / R;
    for (long i = 0; i < R; ++i) {
      lp.grad.row(i).array() -= g * e / C;
      lp.grad(i, targets[static_cast<size_t>(i)]) -= g * (1.0 - e);
    }
  });
}

Var soft_xent(const Var& logp, const Var& target_probs) {
  if (logp.rows() != target_probs.rows() || logp.cols() != target_probs.cols())
    throw ShapeMismatch("soft_xent");
  const long R = logp.rows();
  Matrix out(1, 1);
  out(0, 0) = -logp.value().cwiseProduct(target_probs.value()).sum() / R;
  return make_op(std::move(out), {logp, target_probs}, [](Node& n) {
    Node& lp = *n.parents[0];
    Node& tp = *n.parents[1];
    const long R = lp.value.rows();
    const double g = n.grad(0, 0) / R;
    if (lp.requires_grad) lp.grad -= g * tp.value;
    if (tp.requires_grad) tp.grad -= g * lp.value;
  });
}

double finite_diff(const std::function<double(const Matrix&)>& f, const Matrix& x0,
                   int i, int j, double h) {
  Matrix xp = x0, xm = x0;
  xp(i, j) += h;
  xm(i, j) -= h;
  return (f(xp) - f(xm)) / (2.0 * h);
}

}  // namespace m3i::ad
