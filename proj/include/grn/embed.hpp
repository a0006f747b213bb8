// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "grn/batch.hpp"
#include "grn/ops.hpp"

// Representation layer: trainable word-embedding lookup plus a
// character-level CNN feature, concatenated per token.

namespace grn {

/// Trainable word embedding rows for a batch: [B x T x word_dim]. PAD
/// positions contribute zero vectors and leave the PAD row untouched.
template <typename Real>
Node<Real>* word_feature(Graph<Real>& g, Node<Real>* word_table, const Batch& batch) {
  return lookup(g, word_table, batch.word_ids, {batch.B, batch.T}, kPadId);
}

/// Character CNN feature per token: embedding lookup, same-padding conv,
/// then max-over-time restricted to the token's true character count, so
/// the result does not depend on how long the longest word in the batch
/// happens to be. Output is [B x T x channels].
template <typename Real>
Node<Real>* char_feature(Graph<Real>& g, Node<Real>* char_table, Node<Real>* kernel,
                         Node<Real>* bias, const Batch& batch) {
  const size_t cells = static_cast<size_t>(batch.B) * batch.T;
  for (size_t i = 0; i < cells; ++i)
    if (batch.mask[i] && batch.word_lengths[i] == 0)
      throw std::invalid_argument("char_feature: zero-character real token");

  const int k = kernel->shape[1];
  const int channels = kernel->shape[0];
  Node<Real>* emb =
      lookup(g, char_table, batch.char_ids, {batch.B * batch.T, batch.C}, kPadId);
  Node<Real>* conv = conv1d(g, emb, kernel, k / 2, bias);
  Node<Real>* pooled = max_over_time(g, conv, &batch.word_lengths);
  return reshape(g, pooled, {batch.B, batch.T, channels});
}

/// Final word feature z_i = [c_i, w_i] with dropout on the concatenation
/// in training mode; padded positions are zeroed.
template <typename Real>
Node<Real>* represent(Graph<Real>& g, Node<Real>* word_table, Node<Real>* char_table,
                      Node<Real>* char_kernel, Node<Real>* char_bias, const Batch& batch,
                      double dropout_rate, bool training) {
  Node<Real>* chars = char_feature(g, char_table, char_kernel, char_bias, batch);
  Node<Real>* words = word_feature(g, word_table, batch);
  Node<Real>* z = concat_last(g, chars, words);
  z = dropout(g, z, dropout_rate, training);
  return mask_rows(g, z, batch.lengths);
}

}  // namespace grn
