// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "m3i/ad/ad.hpp"

namespace m3i::nn {

// Named parameter tensors in a stable order. Var handles share graph nodes,
// so a store can be iterated by the optimizer while forward graphs reuse the
// same leaves. Insertion order is the checkpoint order.
class ParamStore {
 public:
  ad::Var add(const std::string& name, ad::Matrix init, bool requires_grad = true);
  ad::Var get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  size_t size() const { return items_.size(); }

  const std::vector<std::pair<std::string, ad::Var>>& items() const { return items_; }
  std::vector<std::pair<std::string, ad::Var>>& items() { return items_; }

  // Shares nodes; selects names starting with `prefix`.
  ParamStore filtered(const std::string& prefix) const;
  // Deep copy with fresh gradient-free leaves (e.g. a momentum copy).
  ParamStore clone_detached() const;

  long total_elements() const;
  void zero_grads() const;

 private:
  std::vector<std::pair<std::string, ad::Var>> items_;
  std::map<std::string, size_t> index_;
};

// Deterministic parameter init: the stream is derived from (seed, name) so
// values do not depend on registration order.
ad::Matrix normal_init(int rows, int cols, double stddev, uint64_t seed, const std::string& name);

}  // namespace m3i::nn
