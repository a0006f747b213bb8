// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace grn {

using Shape = std::vector<int>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

/// Dense value array in the computation graph. Gradient storage is
/// allocated lazily, on first accumulation during backward().
template <typename Real>
struct Node {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;
  bool requires_grad = false;
  std::function<void()> backprop;  // set by the producing op, empty for leaves

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  bool is_scalar() const { return data.size() == 1; }

  std::vector<Real>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), Real(0));
    return grad;
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), Real(0)); }
};

/// Tape of nodes created during one forward pass. Nodes are appended in
/// creation order, which is a valid topological order, so backward() is a
/// single reverse sweep over the tape. Also owns the RNG used for dropout
/// masks so a forward pass is reproducible from (parameters, input, seed).
template <typename Real>
class Graph {
 public:
  explicit Graph(uint64_t seed = 0) : rng_(seed) {}

  Node<Real>* make(Shape shape, bool requires_grad) {
    tape_.emplace_back();
    Node<Real>& n = tape_.back();
    n.shape = std::move(shape);
    n.data.assign(static_cast<size_t>(numel(n.shape)), Real(0));
    n.requires_grad = requires_grad;
    return &n;
  }

  Node<Real>* constant(Shape shape, std::vector<Real> values, bool requires_grad = false) {
    check_shape(static_cast<int64_t>(values.size()) == numel(shape),
                "constant: value count does not match shape " + shape_str(shape));
    Node<Real>* n = make(std::move(shape), requires_grad);
    n->data = std::move(values);
    return n;
  }

  /// Reverse sweep from a scalar loss. Every requires_grad node reachable
  /// from the loss ends up with its gradient fully accumulated (summed over
  /// all uses). A second call without reset_grads() would double-count and
  /// is rejected.
  void backward(Node<Real>* loss) {
    if (!loss->is_scalar())
      throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss->shape));
    if (backward_done_)
      throw std::logic_error("backward: called twice without reset_grads()");
    backward_done_ = true;
    loss->grad_buffer()[0] += Real(1);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
      // grad still empty means the node is not on any path to the loss
      if (it->backprop && it->requires_grad && !it->grad.empty()) it->backprop();
    }
  }

  void reset_grads() {
    for (auto& n : tape_) n.grad.clear();
    backward_done_ = false;
  }

  /// 53-bit uniform draw in [0,1); hand-mapped so streams are identical
  /// across standard library implementations.
  double uniform01() {
    return static_cast<double>(rng_() >> 11) * (1.0 / 9007199254740992.0);
  }

  size_t node_count() const { return tape_.size(); }

 private:
  std::deque<Node<Real>> tape_;  // deque keeps node addresses stable
  std::mt19937_64 rng_;
  bool backward_done_ = false;
};

}  // namespace grn
