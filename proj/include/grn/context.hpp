// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "grn/batch.hpp"
#include "grn/ops.hpp"

// Context layer: parallel convolution branches over the token axis, tanh,
// fused by channel-wise max. Padded positions are re-zeroed after fusion
// so nothing leaks into the relation layer.

namespace grn {

template <typename Real>
struct ConvBranch {
  Node<Real>* kernel;  // [channels x k x d_in]
  Node<Real>* bias;    // [channels]
};

/// x_i = max_k tanh(conv_k(Z))_i over the configured branches. A single
/// branch skips the cross-branch max (the branch_3 ablation).
template <typename Real>
Node<Real>* context_layer(Graph<Real>& g, Node<Real>* z, const Batch& batch,
                          const std::vector<ConvBranch<Real>>& branches) {
  check_shape(!branches.empty(), "context_layer: no branches configured");
  std::vector<Node<Real>*> outs;
  outs.reserve(branches.size());
  for (const auto& br : branches) {
    const int k = br.kernel->shape[1];
    Node<Real>* c = conv1d(g, z, br.kernel, k / 2, br.bias);
    outs.push_back(activation(g, c, Act::Tanh));
  }
  Node<Real>* fused = outs.size() == 1 ? outs[0] : max_across(g, outs);
  return mask_rows(g, fused, batch.lengths);
}

/// The w/o-context ablation: a trainable linear map bridges the
/// representation straight to the relation layer's width.
template <typename Real>
Node<Real>* context_bypass(Graph<Real>& g, Node<Real>* z, const Batch& batch, Node<Real>* W,
                           Node<Real>* b) {
  return mask_rows(g, linear(g, z, W, b), batch.lengths);
}

}  // namespace grn
