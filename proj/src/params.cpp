// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/nn/params.hpp"

#include "m3i/error.hpp"
#include "m3i/rng.hpp"

namespace m3i::nn {

ad::Var ParamStore::add(const std::string& name, ad::Matrix init, bool requires_grad) {
  if (index_.count(name)) throw Error("duplicate parameter '" + name + "'");
  ad::Var v = ad::leaf(std::move(init), requires_grad);
  index_[name] = items_.size();
  items_.emplace_back(name, v);
  return v;
}

ad::Var ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
  return items_[it->second].second;
}

ParamStore ParamStore::filtered(const std::string& prefix) const {
  ParamStore out;
  for (const auto& [name, var] : items_) {
    if (name.rfind(prefix, 0) == 0) {
      out.index_[name] = out.items_.size();
      out.items_.emplace_back(name, var);
    }
  }
  return out;
}

ParamStore ParamStore::clone_detached() const {
  ParamStore out;
  for (const auto& [name, var] : items_) out.add(name, var.value(), /*requires_grad=*/false);
  return out;
}

long ParamStore::total_elements() const {
  long n = 0;
  for (const auto& [name, var] : items_) n += var.rows() * var.cols();
  return n;
}

void ParamStore::zero_grads() const {
  for (const auto& [name, var] : items_)
    var.node()->grad = ad::Matrix::Zero(var.rows(), var.cols());
}

ad::Matrix normal_init(int rows, int cols, double stddev, uint64_t seed, const std::string& name) {
  Rng rng(hash_combine(seed, hash_string(name)));
  ad::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

}  // namespace m3i::nn
