// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "m3i/ad/ad.hpp"
#include "m3i/rng.hpp"

using namespace m3i;
using ad::Matrix;
using ad::Var;

namespace {

Matrix random_matrix(int r, int c, uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

// Sampled central-difference check of d(scalar graph)/d(input matrix).
void gradcheck(const std::function<Var(const Var&)>& graph, const Matrix& x0,
               double tol = 1e-7, int max_coords = 24) {
  Var x = ad::leaf(x0);
  Var y = graph(x);
  REQUIRE(y.rows() == 1);
  REQUIRE(y.cols() == 1);
  ad::backward(y);
  Matrix analytic = x.grad();

  auto f = [&](const Matrix& xv) {
    Var xc = ad::leaf(xv, false);
    return graph(xc).value()(0, 0);
  };

  Rng rng(9);
  const int total = static_cast<int>(x0.rows() * x0.cols());
  const int n = std::min(max_coords, total);
  for (int k = 0; k < n; ++k) {
    const int flat = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(total)));
    const int i = flat / static_cast<int>(x0.cols());
    const int j = flat % static_cast<int>(x0.cols());
    const double fd = ad::finite_diff(f, x0, i, j, 1e-6);
    const double an = analytic(i, j);
    CAPTURE(i);
    CAPTURE(j);
    CHECK(std::abs(an - fd) <= tol * std::max({1.0, std::abs(an), std::abs(fd)}));
  }
}

}  // namespace

TEST_CASE("backward accumulates through shared subgraphs") {
  Var x = ad::leaf(Matrix::Constant(1, 1, 3.0));
  Var y = ad::add(ad::mul(x, x), x);  // x^2 + x -> dy/dx = 2x + 1 = 7
  ad::backward(y);
  CHECK(x.grad()(0, 0) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("detach blocks gradient flow") {
  Var x = ad::leaf(Matrix::Constant(1, 1, 2.0));
  Var y = ad::mul(ad::detach(x), x);  // treated as c*x
  ad::backward(y);
  CHECK(x.grad()(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("elementwise and matmul gradients match finite differences") {
  Matrix x0 = random_matrix(4, 5, 1);
  Matrix w = random_matrix(5, 3, 2);
  gradcheck([&](const Var& x) { return ad::sum_all(ad::matmul(x, ad::constant(w))); }, x0);
  gradcheck([&](const Var& x) { return ad::mean_all(ad::mul(x, x)); }, x0);
  gradcheck([&](const Var& x) { return ad::sum_all(ad::gelu(x)); }, x0);
  gradcheck([&](const Var& x) { return ad::sum_all(ad::transpose(x)); }, x0);
  gradcheck([&](const Var& x) {
    return ad::sum_all(ad::mul(ad::add_scalar(ad::scalar_mul(x, 1.7), 0.3), x));
  }, x0);
}

TEST_CASE("row ops gradients") {
  Matrix x0 = random_matrix(6, 4, 3);
  Matrix v0 = random_matrix(1, 4, 4);
  gradcheck([&](const Var& x) {
    return ad::sum_all(ad::mul(ad::add_rowvec(x, ad::constant(v0)), x));
  }, x0);
  gradcheck([&](const Var& v) {
    return ad::sum_all(ad::mul(ad::add_rowvec(ad::constant(x0), v), ad::constant(x0)));
  }, v0);
  gradcheck([&](const Var& v) {
    return ad::sum_all(ad::mul(ad::mul_rowvec(ad::constant(x0), v), ad::constant(x0)));
  }, v0);
  gradcheck([&](const Var& v) { return ad::mean_all(ad::broadcast_rows(v, 5)); }, v0);
  gradcheck([&](const Var& x) { return ad::sum_all(ad::mul(ad::mean_rows(x), ad::mean_rows(x))); },
            x0);
  gradcheck([&](const Var& x) { return ad::sum_all(ad::mul(ad::sum_rows(x), ad::constant(v0))); },
            x0);
}

TEST_CASE("gather, concat and merge gradients") {
  Matrix x0 = random_matrix(5, 3, 5);
  std::vector<int> idx = {4, 0, 2, 2};
  gradcheck([&](const Var& x) {
    return ad::mean_all(ad::mul(ad::gather_rows(x, idx), ad::gather_rows(x, idx)));
  }, x0);
  gradcheck([&](const Var& x) {
    return ad::sum_all(ad::mul(ad::concat_rows({x, ad::scalar_mul(x, 2.0)}),
                               ad::concat_rows({x, x})));
  }, x0);
  std::vector<uint8_t> flags = {1, 0, 1, 0, 1};
  gradcheck([&](const Var& x) {
    Var merged = ad::select_rows_merge(x, ad::scalar_mul(x, -2.0), flags);
    return ad::sum_all(ad::mul(merged, merged));
  }, x0);
}

TEST_CASE("softmax family gradients and values") {
  Matrix x0 = random_matrix(4, 6, 6);
  Matrix t = Matrix::Zero(4, 6);
  for (int i = 0; i < 4; ++i) t(i, (i * 2) % 6) = 1.0;
  gradcheck([&](const Var& x) {
    return ad::sum_all(ad::mul(ad::row_softmax(x), ad::constant(t)));
  }, x0, 1e-6);
  gradcheck([&](const Var& x) {
    return ad::sum_all(ad::mul(ad::row_log_softmax(x), ad::constant(t)));
  }, x0, 1e-6);
  std::vector<int> targets = {1, 3, 0, 5};
  gradcheck([&](const Var& x) { return ad::nll_index(ad::row_log_softmax(x), targets, 0.0); }, x0,
            1e-6);
  gradcheck([&](const Var& x) { return ad::nll_index(ad::row_log_softmax(x), targets, 0.1); }, x0,
            1e-6);

  // log-softmax rows exponentiate to 1
  Var lp = ad::row_log_softmax(ad::constant(x0));
  for (int i = 0; i < 4; ++i)
    CHECK(lp.value().row(i).array().exp().sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("soft cross-entropy gradient flows to both sides") {
  Matrix p0 = random_matrix(3, 5, 7);
  Matrix q0 = random_matrix(3, 5, 8);
  gradcheck([&](const Var& p) {
    return ad::soft_xent(ad::row_log_softmax(p), ad::row_softmax(ad::constant(q0)));
  }, p0, 1e-6);
  gradcheck([&](const Var& q) {
    return ad::soft_xent(ad::row_log_softmax(ad::constant(p0)), ad::row_softmax(q));
  }, q0, 1e-6);
}

TEST_CASE("layer_norm matches finite differences") {
  Matrix x0 = random_matrix(5, 8, 9);
  Matrix g0 = random_matrix(1, 8, 10);
  Matrix b0 = random_matrix(1, 8, 11);
  Matrix probe = random_matrix(5, 8, 12);
  auto readout = [&](const Var& y) { return ad::sum_all(ad::mul(y, ad::constant(probe))); };
  gradcheck([&](const Var& x) {
    return readout(ad::layer_norm(x, ad::constant(g0), ad::constant(b0)));
  }, x0, 1e-6);
  gradcheck([&](const Var& g) {
    return readout(ad::layer_norm(ad::constant(x0), g, ad::constant(b0)));
  }, g0, 1e-6);
  gradcheck([&](const Var& b) {
    return readout(ad::layer_norm(ad::constant(x0), ad::constant(g0), b));
  }, b0, 1e-6);
}

TEST_CASE("l2 row normalization gradient and unit norms") {
  Matrix x0 = random_matrix(4, 6, 13);
  Var y = ad::l2_normalize_rows(ad::constant(x0));
  for (int i = 0; i < 4; ++i) CHECK(y.value().row(i).norm() == doctest::Approx(1.0));
  Matrix probe = random_matrix(4, 6, 14);
  gradcheck([&](const Var& x) {
    return ad::sum_all(ad::mul(ad::l2_normalize_rows(x), ad::constant(probe)));
  }, x0, 1e-6);
}

TEST_CASE("scaled dot-product attention gradients (multi-head, batched)") {
  const int B = 2, N = 3, D = 8, H = 2;
  Matrix q0 = random_matrix(B * N, D, 15);
  Matrix k0 = random_matrix(B * N, D, 16);
  Matrix v0 = random_matrix(B * N, D, 17);
  Matrix probe = random_matrix(B * N, D, 18);
  auto readout = [&](const Var& y) { return ad::sum_all(ad::mul(y, ad::constant(probe))); };
  gradcheck([&](const Var& q) {
    return readout(ad::sdpa(q, ad::constant(k0), ad::constant(v0), H, N, N));
  }, q0, 1e-6);
  gradcheck([&](const Var& k) {
    return readout(ad::sdpa(ad::constant(q0), k, ad::constant(v0), H, N, N));
  }, k0, 1e-6);
  gradcheck([&](const Var& v) {
    return readout(ad::sdpa(ad::constant(q0), ad::constant(k0), v, H, N, N));
  }, v0, 1e-6);

  // cross-attention shape: one query row per sample
  Matrix q1 = random_matrix(B, D, 19);
  Matrix probe1 = random_matrix(B, D, 20);
  gradcheck([&](const Var& v) {
    Var pooled = ad::sdpa(ad::constant(q1), ad::constant(k0), v, H, 1, N);
    return ad::sum_all(ad::mul(pooled, ad::constant(probe1)));
  }, v0, 1e-6);
}

TEST_CASE("cwise helpers") {
  Matrix x0 = random_matrix(3, 4, 21).array().abs().matrix();
  x0.array() += 0.2;
  gradcheck([&](const Var& x) { return ad::sum_all(ad::cw_sqrt(x)); }, x0, 1e-6);
  gradcheck([&](const Var& x) { return ad::sum_all(ad::cw_reciprocal(x)); }, x0, 1e-6);
  gradcheck([&](const Var& x) { return ad::sum_all(ad::cw_log(x)); }, x0, 1e-6);
  gradcheck([&](const Var& x) { return ad::sum_all(ad::cw_exp(x)); }, x0, 1e-6);
  gradcheck([&](const Var& x) { return ad::sum_all(ad::cw_max_const(x, 0.5)); }, x0, 1e-5);
}

TEST_CASE("repeated backward calls do not mix gradients") {
  Var x = ad::leaf(Matrix::Constant(1, 1, 2.0));
  Var y = ad::mul(x, x);
  ad::backward(y);
  const double g1 = x.grad()(0, 0);
  ad::backward(y);
  CHECK(x.grad()(0, 0) == doctest::Approx(g1));
}
