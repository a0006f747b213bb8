// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "grn/tensor.hpp"

namespace grn {

/// Long-lived learnable arrays keyed by canonical names. Order of add()
/// calls fixes the order used for checkpoints and optimizer state.
template <typename Real>
class ParamStore {
 public:
  Node<Real>* add(const std::string& name, Shape shape) {
    if (index_.count(name)) throw std::logic_error("parameter '" + name + "' already exists");
    slots_.emplace_back();
    Node<Real>& n = slots_.back();
    n.shape = std::move(shape);
    n.data.assign(static_cast<size_t>(numel(n.shape)), Real(0));
    n.grad.assign(n.data.size(), Real(0));
    n.requires_grad = true;
    named_.emplace_back(name, &n);
    index_.emplace(name, &n);
    return &n;
  }

  Node<Real>* get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
    return it->second;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::pair<std::string, Node<Real>*>>& named() const { return named_; }

  void zero_grad() {
    for (auto& [name, node] : named_) node->zero_grad();
  }

  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& [name, node] : named_) n += node->size();
    return n;
  }

 private:
  std::deque<Node<Real>> slots_;  // stable addresses
  std::vector<std::pair<std::string, Node<Real>*>> named_;
  std::unordered_map<std::string, Node<Real>*> index_;
};

}  // namespace grn
