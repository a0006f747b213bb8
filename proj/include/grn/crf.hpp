// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <memory>

#include "grn/batch.hpp"
#include "grn/ops.hpp"

// Linear-chain CRF. Transition weights are a dense (L+1)x(L+1) matrix with
// a virtual boundary label at index L: row L holds START->y weights and
// column L holds y->STOP weights; paths into START or out of STOP simply do
// not exist in this parameterization. The partition function uses the
// log-space forward algorithm with max-shifted log-sum-exp; gradients come
// from forward-backward marginals.

namespace grn {

template <typename Real>
struct LatticeScores {
  Node<Real>* emissions;    // [B x T x L]
  Node<Real>* transitions;  // [(L+1) x (L+1)]
  std::vector<int> lengths;
  int label_count() const { return emissions->shape[2]; }
};

/// Emission scores per label per position: W_y p_i. Transitions are shared
/// batch-wide.
template <typename Real>
LatticeScores<Real> potentials(Graph<Real>& g, Node<Real>* p, Node<Real>* w_y,
                               Node<Real>* transitions, const std::vector<int>& lengths) {
  check_shape(p->shape.size() == 3, "potentials: expected [BxTxC], got " + shape_str(p->shape));
  const int L = w_y->shape[0];
  check_shape(transitions->shape.size() == 2 && transitions->shape[0] == L + 1 &&
                  transitions->shape[1] == L + 1,
              "potentials: transitions " + shape_str(transitions->shape) +
                  " must be [(L+1)x(L+1)] for L = " + std::to_string(L));
  return {linear(g, p, w_y, nullptr), transitions, lengths};
}

namespace detail {

template <typename Real>
Real log_sum_exp(const Real* v, int n) {
  Real m = v[0];
  for (int i = 1; i < n; ++i) m = std::max(m, v[i]);
  Real acc = 0;
  for (int i = 0; i < n; ++i) acc += std::exp(v[i] - m);
  return m + std::log(acc);
}

}  // namespace detail

/// Negative log-likelihood summed over the batch:
/// sum_b [logZ_b - score(gold path)]. The gold path score includes
/// START->y_1, all adjacent transitions, y_T->STOP and all emissions.
template <typename Real>
Node<Real>* nll_loss(Graph<Real>& g, const LatticeScores<Real>& scores,
                     const std::vector<int>& gold) {
  Node<Real>* em = scores.emissions;
  Node<Real>* tr = scores.transitions;
  const int64_t B = em->shape[0], T = em->shape[1], L = em->shape[2];
  const int64_t S = L;  // boundary label index
  check_shape(static_cast<int64_t>(gold.size()) == B * T, "nll_loss: gold grid size mismatch");

  auto trans = [&](int64_t from, int64_t to) -> Real {
    return tr->data[static_cast<size_t>(from * (L + 1) + to)];
  };

  // per sentence: alphas [len x L] and logZ, kept for the backward pass
  auto alphas = std::make_shared<std::vector<std::vector<Real>>>(static_cast<size_t>(B));
  auto logzs = std::make_shared<std::vector<Real>>(static_cast<size_t>(B), Real(0));

  Node<Real>* out = g.make({1}, em->requires_grad || tr->requires_grad);
  Real total = 0;
  for (int64_t b = 0; b < B; ++b) {
    const int64_t len = scores.lengths[static_cast<size_t>(b)];
    if (len <= 0) throw std::invalid_argument("nll_loss: all-masked sentence in batch");
    const Real* e = em->data.data() + b * T * L;

    auto& a = (*alphas)[static_cast<size_t>(b)];
    a.assign(static_cast<size_t>(len * L), Real(0));
    for (int64_t y = 0; y < L; ++y) a[static_cast<size_t>(y)] = trans(S, y) + e[y];
    std::vector<Real> cand(static_cast<size_t>(L));
    for (int64_t t = 1; t < len; ++t)
      for (int64_t y = 0; y < L; ++y) {
        for (int64_t yp = 0; yp < L; ++yp)
          cand[static_cast<size_t>(yp)] = a[static_cast<size_t>((t - 1) * L + yp)] + trans(yp, y);
        a[static_cast<size_t>(t * L + y)] =
            detail::log_sum_exp(cand.data(), static_cast<int>(L)) + e[t * L + y];
      }
    for (int64_t y = 0; y < L; ++y)
      cand[static_cast<size_t>(y)] = a[static_cast<size_t>((len - 1) * L + y)] + trans(y, S);
    const Real logz = detail::log_sum_exp(cand.data(), static_cast<int>(L));
    (*logzs)[static_cast<size_t>(b)] = logz;

    const int* gp = gold.data() + b * T;
    for (int64_t t = 0; t < len; ++t)
      if (gp[t] < 0 || gp[t] >= L)
        throw std::invalid_argument("nll_loss: gold label id out of range");
    Real gold_score = trans(S, gp[0]) + e[gp[0]];
    for (int64_t t = 1; t < len; ++t) gold_score += trans(gp[t - 1], gp[t]) + e[t * L + gp[t]];
    gold_score += trans(gp[len - 1], S);

    total += logz - gold_score;
  }
  out->data[0] = total;

  if (out->requires_grad) {
    auto lens = std::make_shared<std::vector<int>>(scores.lengths);
    auto goldv = std::make_shared<std::vector<int>>(gold);
    out->backprop = [=]() {
      const Real u = out->grad[0];
      Real* ge = em->requires_grad ? em->grad_buffer().data() : nullptr;
      Real* gt = tr->requires_grad ? tr->grad_buffer().data() : nullptr;
      auto trans_at = [&](int64_t from, int64_t to) -> Real {
        return tr->data[static_cast<size_t>(from * (L + 1) + to)];
      };
      auto add_trans_grad = [&](int64_t from, int64_t to, Real v) {
        if (gt) gt[from * (L + 1) + to] += v;
      };
      std::vector<Real> beta;
      std::vector<Real> cand(static_cast<size_t>(L));
      for (int64_t b = 0; b < B; ++b) {
        const int64_t len = (*lens)[static_cast<size_t>(b)];
        const Real* e = em->data.data() + b * T * L;
        const auto& a = (*alphas)[static_cast<size_t>(b)];
        const Real logz = (*logzs)[static_cast<size_t>(b)];
        const int* gp = goldv->data() + b * T;

        beta.assign(static_cast<size_t>(len * L), Real(0));
        for (int64_t y = 0; y < L; ++y) beta[static_cast<size_t>((len - 1) * L + y)] = trans_at(y, S);
        for (int64_t t = len - 2; t >= 0; --t)
          for (int64_t yp = 0; yp < L; ++yp) {
            for (int64_t y = 0; y < L; ++y)
              cand[static_cast<size_t>(y)] =
                  trans_at(yp, y) + e[(t + 1) * L + y] + beta[static_cast<size_t>((t + 1) * L + y)];
            beta[static_cast<size_t>(t * L + yp)] = detail::log_sum_exp(cand.data(), static_cast<int>(L));
          }

        // unary marginals minus gold indicators
        if (ge) {
          for (int64_t t = 0; t < len; ++t)
            for (int64_t y = 0; y < L; ++y) {
              const Real m = std::exp(a[static_cast<size_t>(t * L + y)] +
                                      beta[static_cast<size_t>(t * L + y)] - logz);
              ge[(b * T + t) * L + y] += u * (m - Real(gp[t] == y));
            }
        }
        // boundary and pairwise transition marginals minus gold counts
        for (int64_t y = 0; y < L; ++y) {
          const Real m0 = std::exp(a[static_cast<size_t>(y)] + beta[static_cast<size_t>(y)] - logz);
          add_trans_grad(S, y, u * (m0 - Real(gp[0] == y)));
          const Real mT = std::exp(a[static_cast<size_t>((len - 1) * L + y)] +
                                   beta[static_cast<size_t>((len - 1) * L + y)] - logz);
          add_trans_grad(y, S, u * (mT - Real(gp[len - 1] == y)));
        }
        for (int64_t t = 0; t + 1 < len; ++t)
          for (int64_t yp = 0; yp < L; ++yp)
            for (int64_t y = 0; y < L; ++y) {
              const Real m = std::exp(a[static_cast<size_t>(t * L + yp)] + trans_at(yp, y) +
                                      e[(t + 1) * L + y] +
                                      beta[static_cast<size_t>((t + 1) * L + y)] - logz);
              add_trans_grad(yp, y,
                             u * (m - Real(gp[t] == yp && gp[t + 1] == y)));
            }
      }
    };
  }
  return out;
}

template <typename Real>
struct DecodeResult {
  std::vector<std::vector<int>> paths;  // per sentence, true length
  std::vector<Real> scores;             // best path score per sentence
};

/// Viterbi decoding under the same path-score definition as nll_loss.
/// Ties break toward the lower label id at every step.
template <typename Real>
DecodeResult<Real> viterbi(const LatticeScores<Real>& scores) {
  Node<Real>* em = scores.emissions;
  Node<Real>* tr = scores.transitions;
  const int64_t B = em->shape[0], T = em->shape[1], L = em->shape[2];
  const int64_t S = L;
  auto trans = [&](int64_t from, int64_t to) -> Real {
    return tr->data[static_cast<size_t>(from * (L + 1) + to)];
  };

  DecodeResult<Real> res;
  res.paths.resize(static_cast<size_t>(B));
  res.scores.resize(static_cast<size_t>(B));
  std::vector<Real> v(static_cast<size_t>(L)), next(static_cast<size_t>(L));
  for (int64_t b = 0; b < B; ++b) {
    const int64_t len = scores.lengths[static_cast<size_t>(b)];
    if (len <= 0) throw std::invalid_argument("viterbi: all-masked sentence in batch");
    const Real* e = em->data.data() + b * T * L;
    std::vector<int> back(static_cast<size_t>((len > 1 ? len - 1 : 0) * L));

    for (int64_t y = 0; y < L; ++y) v[static_cast<size_t>(y)] = trans(S, y) + e[y];
    for (int64_t t = 1; t < len; ++t) {
      for (int64_t y = 0; y < L; ++y) {
        Real best = v[0] + trans(0, y);
        int arg = 0;
        for (int64_t yp = 1; yp < L; ++yp) {
          const Real cand = v[static_cast<size_t>(yp)] + trans(yp, y);
          if (cand > best) {  // strict: ties keep the lower label id
            best = cand;
            arg = static_cast<int>(yp);
          }
        }
        next[static_cast<size_t>(y)] = best + e[t * L + y];
        back[static_cast<size_t>((t - 1) * L + y)] = arg;
      }
      std::swap(v, next);
    }

    Real best = v[0] + trans(0, S);
    int arg = 0;
    for (int64_t y = 1; y < L; ++y) {
      const Real cand = v[static_cast<size_t>(y)] + trans(y, S);
      if (cand > best) {
        best = cand;
        arg = static_cast<int>(y);
      }
    }
    std::vector<int> path(static_cast<size_t>(len));
    path[static_cast<size_t>(len - 1)] = arg;
    for (int64_t t = len - 2; t >= 0; --t)
      path[static_cast<size_t>(t)] = back[static_cast<size_t>(t * L + path[static_cast<size_t>(t + 1)])];
    res.paths[static_cast<size_t>(b)] = std::move(path);
    res.scores[static_cast<size_t>(b)] = best;
  }
  return res;
}

template <typename Real>
struct BruteForceResult {
  Real log_z;
  std::vector<int> best_path;
  Real best_score;
};

/// Exhaustive enumeration over all L^T label sequences of one sentence.
/// Testing oracle only; refuses instances with more than 10^6 sequences.
template <typename Real>
BruteForceResult<Real> brute_force_check(const LatticeScores<Real>& scores, int sentence) {
  Node<Real>* em = scores.emissions;
  Node<Real>* tr = scores.transitions;
  const int64_t T = em->shape[1], L = em->shape[2];
  const int64_t S = L;
  const int64_t len = scores.lengths[static_cast<size_t>(sentence)];
  check_shape(len >= 1, "brute_force_check: empty sentence");

  double n_seq = std::pow(static_cast<double>(L), static_cast<double>(len));
  if (n_seq > 1e6)
    throw std::invalid_argument("brute_force_check: instance too large (" +
                                std::to_string(L) + "^" + std::to_string(len) + " sequences)");

  auto trans = [&](int64_t from, int64_t to) -> Real {
    return tr->data[static_cast<size_t>(from * (L + 1) + to)];
  };
  const Real* e = em->data.data() + static_cast<int64_t>(sentence) * T * L;

  std::vector<int> seq(static_cast<size_t>(len), 0);
  std::vector<Real> all_scores;
  all_scores.reserve(static_cast<size_t>(n_seq));
  BruteForceResult<Real> res;
  res.best_score = -std::numeric_limits<Real>::infinity();

  const int64_t total = static_cast<int64_t>(n_seq);
  for (int64_t idx = 0; idx < total; ++idx) {
    int64_t rem = idx;
    for (int64_t t = len - 1; t >= 0; --t) {
      seq[static_cast<size_t>(t)] = static_cast<int>(rem % L);
      rem /= L;
    }
    // same left-to-right fold as the Viterbi recursion: (s + trans) + emit
    Real s = trans(S, seq[0]) + e[seq[0]];
    for (int64_t t = 1; t < len; ++t) {
      s += trans(seq[static_cast<size_t>(t - 1)], seq[static_cast<size_t>(t)]);
      s += e[t * L + seq[static_cast<size_t>(t)]];
    }
    s += trans(seq[static_cast<size_t>(len - 1)], S);
    all_scores.push_back(s);
    if (s > res.best_score) {
      res.best_score = s;
      res.best_path = seq;
    }
  }
  res.log_z = detail::log_sum_exp(all_scores.data(), static_cast<int>(all_scores.size()));
  return res;
}

}  // namespace grn
