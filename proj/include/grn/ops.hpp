// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdlib>
#include <memory>
#include <type_traits>

#include "grn/tensor.hpp"

// Differentiable primitives. Exactly the operation set the model graph
// needs; no broadcasting, no fusion beyond what the layer code asks for.

namespace grn {

enum class Act { Tanh, Sigmoid };

namespace testhook {
// Multiplier applied inside the tanh backward. Only ever changed by the
// gradcheck negative control; 1.0 in real use.
inline double tanh_backward_scale = 1.0;
}  // namespace testhook

namespace detail {

// Interprets x as [N x T x D] rows; rank-2 inputs are N=1.
inline void as_rows3(const Shape& s, const std::string& op, int64_t* N, int64_t* T, int64_t* D) {
  if (s.size() == 2) {
    *N = 1;
    *T = s[0];
    *D = s[1];
  } else if (s.size() == 3) {
    *N = s[0];
    *T = s[1];
    *D = s[2];
  } else {
    throw std::invalid_argument(op + ": expected rank 2 or 3, got " + shape_str(s));
  }
}

}  // namespace detail

/// out[n,o] = sum_i W[o,i]*x[n,i] + b[o]. x may have any rank >= 1 as long
/// as its last dimension equals D_in; leading dimensions are preserved.
/// b may be null for a bias-free projection.
template <typename Real>
Node<Real>* linear(Graph<Real>& g, Node<Real>* x, Node<Real>* W,
                   std::type_identity_t<Node<Real>*> b = nullptr) {
  check_shape(W->shape.size() == 2, "linear: W must be rank 2, got " + shape_str(W->shape));
  const int64_t dout = W->shape[0], din = W->shape[1];
  check_shape(!x->shape.empty() && x->shape.back() == din,
              "linear: x " + shape_str(x->shape) + " does not conform to W " + shape_str(W->shape));
  if (b) {
    check_shape(b->shape.size() == 1 && b->shape[0] == dout,
                "linear: b " + shape_str(b->shape) + " does not conform to W " + shape_str(W->shape));
  }
  const int64_t n_rows = x->size() / din;

  Shape out_shape = x->shape;
  out_shape.back() = static_cast<int>(dout);
  bool rg = x->requires_grad || W->requires_grad || (b && b->requires_grad);
  Node<Real>* out = g.make(out_shape, rg);

  for (int64_t n = 0; n < n_rows; ++n) {
    const Real* xr = x->data.data() + n * din;
    Real* yr = out->data.data() + n * dout;
    for (int64_t o = 0; o < dout; ++o) {
      const Real* wr = W->data.data() + o * din;
      Real acc = b ? b->data[o] : Real(0);
      for (int64_t i = 0; i < din; ++i) acc += wr[i] * xr[i];
      yr[o] = acc;
    }
  }

  if (rg) {
    out->backprop = [=]() {
      const Real* go = out->grad.data();
      if (x->requires_grad) {
        Real* gx = x->grad_buffer().data();
        for (int64_t n = 0; n < n_rows; ++n)
          for (int64_t o = 0; o < dout; ++o) {
            const Real u = go[n * dout + o];
            const Real* wr = W->data.data() + o * din;
            Real* gxr = gx + n * din;
            for (int64_t i = 0; i < din; ++i) gxr[i] += u * wr[i];
          }
      }
      if (W->requires_grad) {
        Real* gw = W->grad_buffer().data();
        for (int64_t n = 0; n < n_rows; ++n)
          for (int64_t o = 0; o < dout; ++o) {
            const Real u = go[n * dout + o];
            const Real* xr = x->data.data() + n * din;
            Real* gwr = gw + o * din;
            for (int64_t i = 0; i < din; ++i) gwr[i] += u * xr[i];
          }
      }
      if (b && b->requires_grad) {
        Real* gb = b->grad_buffer().data();
        for (int64_t n = 0; n < n_rows; ++n)
          for (int64_t o = 0; o < dout; ++o) gb[o] += go[n * dout + o];
      }
    };
  }
  return out;
}

/// 1-d convolution along the time axis. x is [T x D_in] or [N x T x D_in],
/// kernel is [D_out x k x D_in], input is zero-padded with `pad` positions
/// on each side, output length T' = T + 2*pad - k + 1. Optional bias[D_out].
template <typename Real>
Node<Real>* conv1d(Graph<Real>& g, Node<Real>* x, Node<Real>* kernel, int pad,
                   std::type_identity_t<Node<Real>*> bias = nullptr) {
  check_shape(kernel->shape.size() == 3, "conv1d: kernel must be rank 3, got " + shape_str(kernel->shape));
  int64_t N, T, D;
  detail::as_rows3(x->shape, "conv1d", &N, &T, &D);
  const int64_t dout = kernel->shape[0], k = kernel->shape[1], din = kernel->shape[2];
  check_shape(din == D, "conv1d: x " + shape_str(x->shape) + " does not conform to kernel " +
                            shape_str(kernel->shape));
  check_shape(pad >= 0, "conv1d: pad must be non-negative");
  const int64_t tout = T + 2 * pad - k + 1;
  if (tout <= 0)
    throw std::invalid_argument("conv1d: kernel size " + std::to_string(k) +
                                " exceeds padded input length " + std::to_string(T + 2 * pad));
  if (bias)
    check_shape(bias->shape.size() == 1 && bias->shape[0] == dout,
                "conv1d: bias " + shape_str(bias->shape) + " does not conform to kernel " +
                    shape_str(kernel->shape));

  Shape out_shape = x->shape.size() == 2 ? Shape{static_cast<int>(tout), static_cast<int>(dout)}
                                         : Shape{static_cast<int>(N), static_cast<int>(tout),
                                                 static_cast<int>(dout)};
  bool rg = x->requires_grad || kernel->requires_grad || (bias && bias->requires_grad);
  Node<Real>* out = g.make(out_shape, rg);

  for (int64_t n = 0; n < N; ++n) {
    const Real* xs = x->data.data() + n * T * D;
    Real* ys = out->data.data() + n * tout * dout;
    for (int64_t t = 0; t < tout; ++t)
      for (int64_t o = 0; o < dout; ++o) {
        Real acc = bias ? bias->data[o] : Real(0);
        const Real* kr = kernel->data.data() + o * k * din;
        for (int64_t dk = 0; dk < k; ++dk) {
          const int64_t src = t + dk - pad;
          if (src < 0 || src >= T) continue;  // zero padding
          const Real* xr = xs + src * D;
          const Real* krr = kr + dk * din;
          for (int64_t i = 0; i < din; ++i) acc += krr[i] * xr[i];
        }
        ys[t * dout + o] = acc;
      }
  }

  if (rg) {
    out->backprop = [=]() {
      const Real* go = out->grad.data();
      Real* gx = x->requires_grad ? x->grad_buffer().data() : nullptr;
      Real* gk = kernel->requires_grad ? kernel->grad_buffer().data() : nullptr;
      Real* gb = (bias && bias->requires_grad) ? bias->grad_buffer().data() : nullptr;
      for (int64_t n = 0; n < N; ++n) {
        const Real* xs = x->data.data() + n * T * D;
        const Real* gos = go + n * tout * dout;
        for (int64_t t = 0; t < tout; ++t)
          for (int64_t o = 0; o < dout; ++o) {
            const Real u = gos[t * dout + o];
            if (u == Real(0)) continue;
            if (gb) gb[o] += u;
            const Real* kr = kernel->data.data() + o * k * din;
            for (int64_t dk = 0; dk < k; ++dk) {
              const int64_t src = t + dk - pad;
              if (src < 0 || src >= T) continue;
              if (gx) {
                Real* gxr = gx + (n * T + src) * D;
                const Real* krr = kr + dk * din;
                for (int64_t i = 0; i < din; ++i) gxr[i] += u * krr[i];
              }
              if (gk) {
                Real* gkr = gk + (o * k + dk) * din;
                const Real* xr = xs + src * D;
                for (int64_t i = 0; i < din; ++i) gkr[i] += u * xr[i];
              }
            }
          }
      }
    };
  }
  return out;
}

/// Per-channel max over the time axis: [T x D] -> [D] or [N x T x D] ->
/// [N x D]. `lengths`, when given (one entry per row of a rank-3 input),
/// restricts the max to positions [0, len); len = 0 rows yield zeros and
/// receive no gradient. Ties route the gradient to the first index.
template <typename Real>
Node<Real>* max_over_time(Graph<Real>& g, Node<Real>* x,
                          const std::vector<int>* lengths = nullptr) {
  int64_t N, T, D;
  detail::as_rows3(x->shape, "max_over_time", &N, &T, &D);
  if (T == 0) throw std::invalid_argument("max_over_time: empty time axis");
  if (lengths)
    check_shape(static_cast<int64_t>(lengths->size()) == N,
                "max_over_time: lengths count does not match rows");

  Shape out_shape =
      x->shape.size() == 2 ? Shape{static_cast<int>(D)} : Shape{static_cast<int>(N), static_cast<int>(D)};
  Node<Real>* out = g.make(out_shape, x->requires_grad);
  // arg holds the winning time index per (row, channel); -1 for empty rows
  auto arg = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(N * D), -1);

  for (int64_t n = 0; n < N; ++n) {
    const int64_t len = lengths ? (*lengths)[n] : T;
    check_shape(len <= T, "max_over_time: length exceeds time axis");
    const Real* xs = x->data.data() + n * T * D;
    Real* ys = out->data.data() + n * D;
    for (int64_t d = 0; d < D; ++d) {
      if (len <= 0) {
        ys[d] = Real(0);
        continue;
      }
      int64_t best = 0;
      Real bv = xs[d];
      for (int64_t t = 1; t < len; ++t) {
        const Real v = xs[t * D + d];
        if (v > bv) {
          bv = v;
          best = t;
        }
      }
      ys[d] = bv;
      (*arg)[n * D + d] = best;
    }
  }

  if (x->requires_grad) {
    out->backprop = [=]() {
      Real* gx = x->grad_buffer().data();
      const Real* go = out->grad.data();
      for (int64_t n = 0; n < N; ++n)
        for (int64_t d = 0; d < D; ++d) {
          const int64_t t = (*arg)[n * D + d];
          if (t >= 0) gx[(n * T + t) * D + d] += go[n * D + d];
        }
    };
  }
  return out;
}

/// Elementwise max across a list of same-shaped branches; on ties the
/// earliest branch wins (same rule as max_over_time).
template <typename Real>
Node<Real>* max_across(Graph<Real>& g, const std::vector<Node<Real>*>& branches) {
  check_shape(!branches.empty(), "max_across: empty branch list");
  const Shape& s = branches[0]->shape;
  bool rg = false;
  for (Node<Real>* b : branches) {
    check_shape(b->shape == s, "max_across: shape mismatch " + shape_str(b->shape) + " vs " +
                                   shape_str(s));
    rg = rg || b->requires_grad;
  }
  const int64_t n = branches[0]->size();
  Node<Real>* out = g.make(s, rg);
  auto arg = std::make_shared<std::vector<int32_t>>(static_cast<size_t>(n), 0);

  for (int64_t i = 0; i < n; ++i) {
    Real bv = branches[0]->data[i];
    int32_t bb = 0;
    for (size_t k = 1; k < branches.size(); ++k) {
      const Real v = branches[k]->data[i];
      if (v > bv) {
        bv = v;
        bb = static_cast<int32_t>(k);
      }
    }
    out->data[i] = bv;
    (*arg)[i] = bb;
  }

  if (rg) {
    auto parents = branches;
    out->backprop = [=]() {
      const Real* go = out->grad.data();
      for (int64_t i = 0; i < n; ++i) {
        Node<Real>* p = parents[static_cast<size_t>((*arg)[i])];
        if (p->requires_grad) p->grad_buffer()[i] += go[i];
      }
    };
  }
  return out;
}

/// Elementwise tanh or sigmoid with exact derivative.
template <typename Real>
Node<Real>* activation(Graph<Real>& g, Node<Real>* x, Act kind) {
  Node<Real>* out = g.make(x->shape, x->requires_grad);
  const int64_t n = x->size();
  if (kind == Act::Tanh) {
    for (int64_t i = 0; i < n; ++i) out->data[i] = std::tanh(x->data[i]);
  } else {
    for (int64_t i = 0; i < n; ++i) out->data[i] = Real(1) / (Real(1) + std::exp(-x->data[i]));
  }
  if (x->requires_grad) {
    out->backprop = [=]() {
      Real* gx = x->grad_buffer().data();
      const Real* go = out->grad.data();
      const Real* y = out->data.data();
      if (kind == Act::Tanh) {
        const Real scale = static_cast<Real>(testhook::tanh_backward_scale);
        for (int64_t i = 0; i < n; ++i) gx[i] += scale * go[i] * (Real(1) - y[i] * y[i]);
      } else {
        for (int64_t i = 0; i < n; ++i) gx[i] += go[i] * y[i] * (Real(1) - y[i]);
      }
    };
  }
  return out;
}

/// Inverted dropout: in training mode each element is zeroed with
/// probability `rate` and survivors are scaled by 1/(1-rate), so eval mode
/// is the identity (and returns x itself).
template <typename Real>
Node<Real>* dropout(Graph<Real>& g, Node<Real>* x, double rate, bool training) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;

  Node<Real>* out = g.make(x->shape, x->requires_grad);
  const int64_t n = x->size();
  const Real keep_scale = Real(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<Real>>(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const Real m = g.uniform01() < rate ? Real(0) : keep_scale;
    (*mask)[i] = m;
    out->data[i] = x->data[i] * m;
  }
  if (x->requires_grad) {
    out->backprop = [=]() {
      Real* gx = x->grad_buffer().data();
      const Real* go = out->grad.data();
      for (int64_t i = 0; i < n; ++i) gx[i] += go[i] * (*mask)[i];
    };
  }
  return out;
}

/// Row lookup: out[idx...,:] = table[ids[idx...],:]. Rows equal to pad_id
/// produce zeros and route no gradient, which keeps the padding embedding
/// frozen. Pass pad_id = -1 to disable that rule.
template <typename Real>
Node<Real>* lookup(Graph<Real>& g, Node<Real>* table, const std::vector<int>& ids,
                   const Shape& id_shape, int pad_id) {
  check_shape(table->shape.size() == 2, "lookup: table must be rank 2");
  check_shape(static_cast<int64_t>(ids.size()) == numel(id_shape),
              "lookup: id count does not match id shape " + shape_str(id_shape));
  const int64_t V = table->shape[0], D = table->shape[1];
  for (int id : ids)
    if (id < 0 || id >= V)
      throw std::out_of_range("lookup: id " + std::to_string(id) + " outside table of " +
                              std::to_string(V) + " rows");

  Shape out_shape = id_shape;
  out_shape.push_back(static_cast<int>(D));
  Node<Real>* out = g.make(out_shape, table->requires_grad);
  for (size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] == pad_id) continue;  // stays zero
    const Real* src = table->data.data() + static_cast<int64_t>(ids[r]) * D;
    std::copy(src, src + D, out->data.data() + static_cast<int64_t>(r) * D);
  }

  if (table->requires_grad) {
    auto idv = std::make_shared<std::vector<int>>(ids);
    out->backprop = [=]() {
      Real* gt = table->grad_buffer().data();
      const Real* go = out->grad.data();
      for (size_t r = 0; r < idv->size(); ++r) {
        const int id = (*idv)[r];
        if (id == pad_id) continue;
        Real* dst = gt + static_cast<int64_t>(id) * D;
        const Real* src = go + static_cast<int64_t>(r) * D;
        for (int64_t i = 0; i < D; ++i) dst[i] += src[i];
      }
    };
  }
  return out;
}

/// Concatenate two nodes along the last axis; all leading dims must match.
template <typename Real>
Node<Real>* concat_last(Graph<Real>& g, Node<Real>* a, Node<Real>* b) {
  check_shape(a->shape.size() == b->shape.size() && !a->shape.empty(),
              "concat_last: rank mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  for (size_t i = 0; i + 1 < a->shape.size(); ++i)
    check_shape(a->shape[i] == b->shape[i], "concat_last: leading dims differ " +
                                                shape_str(a->shape) + " vs " + shape_str(b->shape));
  const int64_t da = a->shape.back(), db = b->shape.back();
  const int64_t rows = a->size() / da;
  Shape out_shape = a->shape;
  out_shape.back() = static_cast<int>(da + db);
  bool rg = a->requires_grad || b->requires_grad;
  Node<Real>* out = g.make(out_shape, rg);
  for (int64_t r = 0; r < rows; ++r) {
    std::copy(a->data.data() + r * da, a->data.data() + (r + 1) * da,
              out->data.data() + r * (da + db));
    std::copy(b->data.data() + r * db, b->data.data() + (r + 1) * db,
              out->data.data() + r * (da + db) + da);
  }
  if (rg) {
    out->backprop = [=]() {
      const Real* go = out->grad.data();
      if (a->requires_grad) {
        Real* ga = a->grad_buffer().data();
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t i = 0; i < da; ++i) ga[r * da + i] += go[r * (da + db) + i];
      }
      if (b->requires_grad) {
        Real* gb = b->grad_buffer().data();
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t i = 0; i < db; ++i) gb[r * db + i] += go[r * (da + db) + da + i];
      }
    };
  }
  return out;
}

/// Concatenate along the first axis; trailing dims must match.
template <typename Real>
Node<Real>* concat_first(Graph<Real>& g, const std::vector<Node<Real>*>& parts) {
  check_shape(!parts.empty(), "concat_first: empty list");
  Shape tail(parts[0]->shape.begin() + 1, parts[0]->shape.end());
  int64_t lead = 0;
  bool rg = false;
  for (Node<Real>* p : parts) {
    Shape t(p->shape.begin() + 1, p->shape.end());
    check_shape(t == tail, "concat_first: trailing dims differ");
    lead += p->shape[0];
    rg = rg || p->requires_grad;
  }
  Shape out_shape;
  out_shape.push_back(static_cast<int>(lead));
  out_shape.insert(out_shape.end(), tail.begin(), tail.end());
  Node<Real>* out = g.make(out_shape, rg);
  int64_t off = 0;
  for (Node<Real>* p : parts) {
    std::copy(p->data.begin(), p->data.end(), out->data.begin() + off);
    off += p->size();
  }
  if (rg) {
    auto ps = parts;
    out->backprop = [=]() {
      const Real* go = out->grad.data();
      int64_t o = 0;
      for (Node<Real>* p : ps) {
        if (p->requires_grad) {
          Real* gp = p->grad_buffer().data();
          for (int64_t i = 0; i < p->size(); ++i) gp[i] += go[o + i];
        }
        o += p->size();
      }
    };
  }
  return out;
}

/// Rows [begin, end) along the first axis.
template <typename Real>
Node<Real>* slice_first(Graph<Real>& g, Node<Real>* x, int begin, int end) {
  check_shape(!x->shape.empty() && begin >= 0 && end > begin && end <= x->shape[0],
              "slice_first: bad range on " + shape_str(x->shape));
  const int64_t row = x->shape.empty() ? 1 : x->size() / x->shape[0];
  Shape out_shape = x->shape;
  out_shape[0] = end - begin;
  Node<Real>* out = g.make(out_shape, x->requires_grad);
  std::copy(x->data.begin() + begin * row, x->data.begin() + end * row, out->data.begin());
  if (x->requires_grad) {
    out->backprop = [=]() {
      Real* gx = x->grad_buffer().data();
      const Real* go = out->grad.data();
      for (int64_t i = 0; i < out->size(); ++i) gx[begin * row + i] += go[i];
    };
  }
  return out;
}

/// Copy with a new shape of the same element count.
template <typename Real>
Node<Real>* reshape(Graph<Real>& g, Node<Real>* x, Shape new_shape) {
  check_shape(numel(new_shape) == x->size(),
              "reshape: " + shape_str(x->shape) + " to " + shape_str(new_shape));
  Node<Real>* out = g.make(std::move(new_shape), x->requires_grad);
  out->data = x->data;
  if (x->requires_grad) {
    out->backprop = [=]() {
      Real* gx = x->grad_buffer().data();
      const Real* go = out->grad.data();
      for (int64_t i = 0; i < x->size(); ++i) gx[i] += go[i];
    };
  }
  return out;
}

/// Zero out padded token rows: x is [B x T x D], rows with t >= lengths[b]
/// become zero in both directions.
template <typename Real>
Node<Real>* mask_rows(Graph<Real>& g, Node<Real>* x, const std::vector<int>& lengths) {
  check_shape(x->shape.size() == 3, "mask_rows: expected rank 3, got " + shape_str(x->shape));
  const int64_t B = x->shape[0], T = x->shape[1], D = x->shape[2];
  check_shape(static_cast<int64_t>(lengths.size()) == B, "mask_rows: lengths count mismatch");
  Node<Real>* out = g.make(x->shape, x->requires_grad);
  for (int64_t b = 0; b < B; ++b) {
    const int64_t len = std::min<int64_t>(lengths[b], T);
    std::copy(x->data.data() + b * T * D, x->data.data() + (b * T + len) * D,
              out->data.data() + b * T * D);
  }
  if (x->requires_grad) {
    auto lens = std::make_shared<std::vector<int>>(lengths);
    out->backprop = [=]() {
      Real* gx = x->grad_buffer().data();
      const Real* go = out->grad.data();
      for (int64_t b = 0; b < B; ++b) {
        const int64_t len = std::min<int64_t>((*lens)[b], T);
        for (int64_t i = 0; i < len * D; ++i) gx[b * T * D + i] += go[b * T * D + i];
      }
    };
  }
  return out;
}

template <typename Real>
Node<Real>* add(Graph<Real>& g, Node<Real>* a, Node<Real>* b) {
  check_shape(a->shape == b->shape,
              "add: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  Node<Real>* out = g.make(a->shape, a->requires_grad || b->requires_grad);
  for (int64_t i = 0; i < a->size(); ++i) out->data[i] = a->data[i] + b->data[i];
  if (out->requires_grad) {
    out->backprop = [=]() {
      const Real* go = out->grad.data();
      if (a->requires_grad) {
        Real* ga = a->grad_buffer().data();
        for (int64_t i = 0; i < a->size(); ++i) ga[i] += go[i];
      }
      if (b->requires_grad) {
        Real* gb = b->grad_buffer().data();
        for (int64_t i = 0; i < b->size(); ++i) gb[i] += go[i];
      }
    };
  }
  return out;
}

template <typename Real>
Node<Real>* mul(Graph<Real>& g, Node<Real>* a, Node<Real>* b) {
  check_shape(a->shape == b->shape,
              "mul: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  Node<Real>* out = g.make(a->shape, a->requires_grad || b->requires_grad);
  for (int64_t i = 0; i < a->size(); ++i) out->data[i] = a->data[i] * b->data[i];
  if (out->requires_grad) {
    out->backprop = [=]() {
      const Real* go = out->grad.data();
      if (a->requires_grad) {
        Real* ga = a->grad_buffer().data();
        for (int64_t i = 0; i < a->size(); ++i) ga[i] += go[i] * b->data[i];
      }
      if (b->requires_grad) {
        Real* gb = b->grad_buffer().data();
        for (int64_t i = 0; i < b->size(); ++i) gb[i] += go[i] * a->data[i];
      }
    };
  }
  return out;
}

template <typename Real>
Node<Real>* sum_all(Graph<Real>& g, Node<Real>* x) {
  Node<Real>* out = g.make({1}, x->requires_grad);
  Real acc = 0;
  for (const Real v : x->data) acc += v;
  out->data[0] = acc;
  if (x->requires_grad) {
    out->backprop = [=]() {
      Real* gx = x->grad_buffer().data();
      const Real u = out->grad[0];
      for (int64_t i = 0; i < x->size(); ++i) gx[i] += u;
    };
  }
  return out;
}

}  // namespace grn
