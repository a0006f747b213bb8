// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

// Central finite differences against analytic gradients. Evaluation happens
// through forward passes only, so the check stays independent of the
// backward implementation it verifies.

namespace grn {

/// d f / d x[i] by central differences; restores x[i] afterwards.
template <typename Eval>
double central_difference(std::vector<double>& x, size_t i, double eps, Eval&& eval) {
  const double keep = x[i];
  x[i] = keep + eps;
  const double fp = eval();
  x[i] = keep - eps;
  const double fm = eval();
  x[i] = keep;
  return (fp - fm) / (2.0 * eps);
}

/// Relative error with an absolute floor of 1 in the denominator, so tiny
/// gradients are compared absolutely rather than blowing up the ratio.
inline double grad_rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1.0});
  return std::abs(analytic - numeric) / denom;
}

/// Worst-case relative error over every entry of one parameter buffer.
/// `eval` must recompute the scalar objective from current buffer contents.
template <typename Eval>
double max_grad_rel_error(std::vector<double>& values, const std::vector<double>& analytic,
                          double eps, Eval&& eval) {
  double worst = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    const double fd = central_difference(values, i, eps, eval);
    const double a = i < analytic.size() ? analytic[i] : 0.0;
    worst = std::max(worst, grad_rel_error(a, fd));
  }
  return worst;
}

}  // namespace grn
