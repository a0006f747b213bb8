// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <memory>

#include "grn/batch.hpp"
#include "grn/ops.hpp"

// Gated relation layer. Relation score vectors r_ij are computed for every
// ordered token pair (i == j included); the fusion variants reduce them to
// one global context feature per token. All sums run over real tokens only
// and normalize by the true sentence length, never by the padded length,
// so batch padding cannot change the result at real positions.

namespace grn {

namespace detail {

template <typename Real>
Real sigmoid(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

}  // namespace detail

/// r_ij = W_rx [x_i; x_j] + b_rx for all ordered pairs of real tokens:
/// [B x T x C] -> [B x T x T x C]. Entries with a padded i or j stay zero
/// and are ignored by every consumer.
template <typename Real>
Node<Real>* relation_scores(Graph<Real>& g, Node<Real>* x, const std::vector<int>& lengths,
                            Node<Real>* w_rx, Node<Real>* b_rx) {
  check_shape(x->shape.size() == 3, "relation_scores: expected [BxTxC], got " + shape_str(x->shape));
  const int64_t B = x->shape[0], T = x->shape[1], C = x->shape[2];
  check_shape(w_rx->shape.size() == 2 && w_rx->shape[0] == C && w_rx->shape[1] == 2 * C,
              "relation_scores: W " + shape_str(w_rx->shape) + " does not conform to x " +
                  shape_str(x->shape));
  check_shape(b_rx->shape.size() == 1 && b_rx->shape[0] == C, "relation_scores: bad bias shape");

  bool rg = x->requires_grad || w_rx->requires_grad || b_rx->requires_grad;
  Node<Real>* out = g.make({static_cast<int>(B), static_cast<int>(T), static_cast<int>(T),
                            static_cast<int>(C)},
                           rg);
  for (int64_t b = 0; b < B; ++b) {
    const int64_t len = lengths[static_cast<size_t>(b)];
    for (int64_t i = 0; i < len; ++i) {
      const Real* xi = x->data.data() + (b * T + i) * C;
      for (int64_t j = 0; j < len; ++j) {
        const Real* xj = x->data.data() + (b * T + j) * C;
        Real* r = out->data.data() + ((b * T + i) * T + j) * C;
        for (int64_t o = 0; o < C; ++o) {
          const Real* w = w_rx->data.data() + o * 2 * C;
          Real acc = b_rx->data[o];
          for (int64_t k = 0; k < C; ++k) acc += w[k] * xi[k];
          for (int64_t k = 0; k < C; ++k) acc += w[C + k] * xj[k];
          r[o] = acc;
        }
      }
    }
  }

  if (rg) {
    auto lens = std::make_shared<std::vector<int>>(lengths);
    out->backprop = [=]() {
      const Real* go = out->grad.data();
      Real* gx = x->requires_grad ? x->grad_buffer().data() : nullptr;
      Real* gw = w_rx->requires_grad ? w_rx->grad_buffer().data() : nullptr;
      Real* gb = b_rx->requires_grad ? b_rx->grad_buffer().data() : nullptr;
      for (int64_t b = 0; b < B; ++b) {
        const int64_t len = (*lens)[static_cast<size_t>(b)];
        for (int64_t i = 0; i < len; ++i) {
          const Real* xi = x->data.data() + (b * T + i) * C;
          for (int64_t j = 0; j < len; ++j) {
            const Real* xj = x->data.data() + (b * T + j) * C;
            const Real* gr = go + ((b * T + i) * T + j) * C;
            for (int64_t o = 0; o < C; ++o) {
              const Real u = gr[o];
              if (u == Real(0)) continue;
              const Real* w = w_rx->data.data() + o * 2 * C;
              if (gb) gb[o] += u;
              if (gw) {
                Real* gwr = gw + o * 2 * C;
                for (int64_t k = 0; k < C; ++k) gwr[k] += u * xi[k];
                for (int64_t k = 0; k < C; ++k) gwr[C + k] += u * xj[k];
              }
              if (gx) {
                Real* gxi = gx + (b * T + i) * C;
                Real* gxj = gx + (b * T + j) * C;
                for (int64_t k = 0; k < C; ++k) gxi[k] += u * w[k];
                for (int64_t k = 0; k < C; ++k) gxj[k] += u * w[C + k];
              }
            }
          }
        }
      }
    };
  }
  return out;
}

/// Gated fusion: r_i = (1/T) sum_j sigmoid(r_ij) .* x_j over real j,
/// normalized by the true sentence length.
template <typename Real>
Node<Real>* fuse_grn(Graph<Real>& g, Node<Real>* r, Node<Real>* x,
                     const std::vector<int>& lengths) {
  check_shape(r->shape.size() == 4 && x->shape.size() == 3, "fuse_grn: bad ranks");
  const int64_t B = x->shape[0], T = x->shape[1], C = x->shape[2];
  check_shape(r->shape[0] == B && r->shape[1] == T && r->shape[2] == T && r->shape[3] == C,
              "fuse_grn: relation tensor " + shape_str(r->shape) + " does not match x " +
                  shape_str(x->shape));

  bool rg = r->requires_grad || x->requires_grad;
  Node<Real>* out = g.make(x->shape, rg);
  for (int64_t b = 0; b < B; ++b) {
    const int64_t len = lengths[static_cast<size_t>(b)];
    for (int64_t i = 0; i < len; ++i) {
      Real* y = out->data.data() + (b * T + i) * C;
      for (int64_t d = 0; d < C; ++d) {
        Real acc = 0;
        for (int64_t j = 0; j < len; ++j) {
          const Real rij = r->data[((b * T + i) * T + j) * C + d];
          acc += detail::sigmoid(rij) * x->data[(b * T + j) * C + d];
        }
        y[d] = acc / Real(len);
      }
    }
  }

  if (rg) {
    auto lens = std::make_shared<std::vector<int>>(lengths);
    out->backprop = [=]() {
      const Real* go = out->grad.data();
      Real* gr = r->requires_grad ? r->grad_buffer().data() : nullptr;
      Real* gx = x->requires_grad ? x->grad_buffer().data() : nullptr;
      for (int64_t b = 0; b < B; ++b) {
        const int64_t len = (*lens)[static_cast<size_t>(b)];
        const Real inv_len = len > 0 ? Real(1) / Real(len) : Real(0);
        for (int64_t i = 0; i < len; ++i)
          for (int64_t d = 0; d < C; ++d) {
            const Real u = go[(b * T + i) * C + d] * inv_len;
            if (u == Real(0)) continue;
            for (int64_t j = 0; j < len; ++j) {
              const int64_t rix = ((b * T + i) * T + j) * C + d;
              const Real s = detail::sigmoid(r->data[rix]);
              const Real xj = x->data[(b * T + j) * C + d];
              if (gr) gr[rix] += u * s * (Real(1) - s) * xj;
              if (gx) gx[(b * T + j) * C + d] += u * s;
            }
          }
      }
    };
  }
  return out;
}

/// Direct fusion (DFN): r_i = (1/T) sum_j r_ij over real j.
template <typename Real>
Node<Real>* fuse_dfn(Graph<Real>& g, Node<Real>* r, const std::vector<int>& lengths) {
  check_shape(r->shape.size() == 4, "fuse_dfn: expected [BxTxTxC]");
  const int64_t B = r->shape[0], T = r->shape[1], C = r->shape[3];
  Node<Real>* out = g.make({static_cast<int>(B), static_cast<int>(T), static_cast<int>(C)},
                           r->requires_grad);
  for (int64_t b = 0; b < B; ++b) {
    const int64_t len = lengths[static_cast<size_t>(b)];
    for (int64_t i = 0; i < len; ++i)
      for (int64_t d = 0; d < C; ++d) {
        Real acc = 0;
        for (int64_t j = 0; j < len; ++j) acc += r->data[((b * T + i) * T + j) * C + d];
        out->data[(b * T + i) * C + d] = acc / Real(len);
      }
  }
  if (r->requires_grad) {
    auto lens = std::make_shared<std::vector<int>>(lengths);
    out->backprop = [=]() {
      Real* gr = r->grad_buffer().data();
      const Real* go = out->grad.data();
      for (int64_t b = 0; b < B; ++b) {
        const int64_t len = (*lens)[static_cast<size_t>(b)];
        const Real inv_len = len > 0 ? Real(1) / Real(len) : Real(0);
        for (int64_t i = 0; i < len; ++i)
          for (int64_t d = 0; d < C; ++d) {
            const Real u = go[(b * T + i) * C + d] * inv_len;
            for (int64_t j = 0; j < len; ++j) gr[((b * T + i) * T + j) * C + d] += u;
          }
      }
    };
  }
  return out;
}

/// Gated attention (GAttN): a scalar gate per pair,
/// alpha_ij = sigmoid(W_x [x_i;x_j] + b_x), r_i = (1/T) sum_j alpha_ij * x_j.
template <typename Real>
Node<Real>* fuse_gattn(Graph<Real>& g, Node<Real>* x, const std::vector<int>& lengths,
                       Node<Real>* w_x, Node<Real>* b_x) {
  check_shape(x->shape.size() == 3, "fuse_gattn: expected [BxTxC]");
  const int64_t B = x->shape[0], T = x->shape[1], C = x->shape[2];
  check_shape(w_x->shape.size() == 2 && w_x->shape[0] == 1 && w_x->shape[1] == 2 * C,
              "fuse_gattn: W " + shape_str(w_x->shape) + " does not conform to x " +
                  shape_str(x->shape));
  check_shape(b_x->size() == 1, "fuse_gattn: bias must be scalar");

  bool rg = x->requires_grad || w_x->requires_grad || b_x->requires_grad;
  Node<Real>* out = g.make(x->shape, rg);
  auto alpha = std::make_shared<std::vector<Real>>(static_cast<size_t>(B * T * T), Real(0));
  for (int64_t b = 0; b < B; ++b) {
    const int64_t len = lengths[static_cast<size_t>(b)];
    for (int64_t i = 0; i < len; ++i) {
      const Real* xi = x->data.data() + (b * T + i) * C;
      Real* y = out->data.data() + (b * T + i) * C;
      for (int64_t j = 0; j < len; ++j) {
        const Real* xj = x->data.data() + (b * T + j) * C;
        Real z = b_x->data[0];
        for (int64_t k = 0; k < C; ++k) z += w_x->data[k] * xi[k];
        for (int64_t k = 0; k < C; ++k) z += w_x->data[C + k] * xj[k];
        const Real a = detail::sigmoid(z);
        (*alpha)[(b * T + i) * T + j] = a;
        for (int64_t d = 0; d < C; ++d) y[d] += a * xj[d];
      }
      for (int64_t d = 0; d < C; ++d) y[d] /= Real(len);
    }
  }

  if (rg) {
    auto lens = std::make_shared<std::vector<int>>(lengths);
    out->backprop = [=]() {
      const Real* go = out->grad.data();
      Real* gx = x->requires_grad ? x->grad_buffer().data() : nullptr;
      Real* gw = w_x->requires_grad ? w_x->grad_buffer().data() : nullptr;
      Real* gb = b_x->requires_grad ? b_x->grad_buffer().data() : nullptr;
      for (int64_t b = 0; b < B; ++b) {
        const int64_t len = (*lens)[static_cast<size_t>(b)];
        const Real inv_len = len > 0 ? Real(1) / Real(len) : Real(0);
        for (int64_t i = 0; i < len; ++i) {
          const Real* gi = go + (b * T + i) * C;
          const Real* xi = x->data.data() + (b * T + i) * C;
          for (int64_t j = 0; j < len; ++j) {
            const Real* xj = x->data.data() + (b * T + j) * C;
            const Real a = (*alpha)[(b * T + i) * T + j];
            Real galpha = 0;
            for (int64_t d = 0; d < C; ++d) galpha += gi[d] * inv_len * xj[d];
            if (gx) {
              Real* gxj = gx + (b * T + j) * C;
              for (int64_t d = 0; d < C; ++d) gxj[d] += gi[d] * inv_len * a;
            }
            const Real gz = galpha * a * (Real(1) - a);
            if (gz == Real(0)) continue;
            if (gb) gb[0] += gz;
            if (gw) {
              for (int64_t k = 0; k < C; ++k) gw[k] += gz * xi[k];
              for (int64_t k = 0; k < C; ++k) gw[C + k] += gz * xj[k];
            }
            if (gx) {
              Real* gxi = gx + (b * T + i) * C;
              Real* gxj = gx + (b * T + j) * C;
              for (int64_t k = 0; k < C; ++k) gxi[k] += gz * w_x->data[k];
              for (int64_t k = 0; k < C; ++k) gxj[k] += gz * w_x->data[C + k];
            }
          }
        }
      }
    };
  }
  return out;
}

/// Final predicting feature p_i = tanh(r_i), with dropout in training mode.
template <typename Real>
Node<Real>* predict_features(Graph<Real>& g, Node<Real>* r, double dropout_rate, bool training) {
  return dropout(g, activation(g, r, Act::Tanh), dropout_rate, training);
}

struct Heatmap {
  std::vector<std::string> tokens;
  std::vector<double> values;  // T x T, normalized to [0,1]
};

/// L2 norms of r_ij for one sentence, min-max normalized over the whole
/// matrix. A constant matrix (degenerate min = max) maps to all zeros.
template <typename Real>
Heatmap export_heatmap(const Node<Real>* r, int sentence, int length,
                       const std::vector<std::string>& tokens) {
  check_shape(r->shape.size() == 4, "export_heatmap: expected [BxTxTxC]");
  const int64_t T = r->shape[1], C = r->shape[3];
  check_shape(sentence >= 0 && sentence < r->shape[0] && length <= T,
              "export_heatmap: bad sentence index or length");
  check_shape(static_cast<int>(tokens.size()) == length, "export_heatmap: token count mismatch");

  Heatmap h;
  h.tokens = tokens;
  h.values.resize(static_cast<size_t>(length) * length);
  double lo = 0, hi = 0;
  for (int i = 0; i < length; ++i)
    for (int j = 0; j < length; ++j) {
      const Real* rr = r->data.data() + ((static_cast<int64_t>(sentence) * T + i) * T + j) * C;
      double sq = 0;
      for (int64_t d = 0; d < C; ++d) sq += static_cast<double>(rr[d]) * rr[d];
      const double norm = std::sqrt(sq);
      h.values[static_cast<size_t>(i) * length + j] = norm;
      if (i == 0 && j == 0) {
        lo = hi = norm;
      } else {
        lo = std::min(lo, norm);
        hi = std::max(hi, norm);
      }
    }
  if (hi > lo) {
    for (double& v : h.values) v = (v - lo) / (hi - lo);
  } else {
    std::fill(h.values.begin(), h.values.end(), 0.0);
  }
  return h;
}

/// TSV layout: first row lists the tokens; each following row is the token
/// label followed by its T normalized values to 6 decimal places.
inline std::string heatmap_to_tsv(const Heatmap& h) {
  const size_t T = h.tokens.size();
  std::string out;
  for (size_t j = 0; j < T; ++j) {
    if (j) out += '\t';
    out += h.tokens[j];
  }
  out += '\n';
  char buf[32];
  for (size_t i = 0; i < T; ++i) {
    out += h.tokens[i];
    for (size_t j = 0; j < T; ++j) {
      std::snprintf(buf, sizeof buf, "\t%.6f", h.values[i * T + j]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace grn
