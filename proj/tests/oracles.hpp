// Copyright 2026 The decoar authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Independent test oracles. Everything here recomputes expectations from
// first principles (finite differences, exhaustive enumeration) and must not
// call back into the code path under test.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <vector>

#include "decoar/tensor.hpp"

namespace oracles {

// Central finite difference of `forward` w.r.t. one entry of `param`.
// `forward` must re-run the computation from current values and return the
// scalar loss; it is evaluated with no tape active.
inline double finite_difference(const std::function<double()>& forward,
                                decoar::Tensor param, std::size_t index,
                                double h = 1e-5) {
  decoar::NoGradScope ng;
  double& x = param.value()[index];
  const double saved = x;
  x = saved + h;
  const double fp = forward();
  x = saved - h;
  const double fm = forward();
  x = saved;
  return (fp - fm) / (2.0 * h);
}

// Relative error with a small floor so near-zero gradients compare on an
// absolute scale.
inline double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-3});
  return std::abs(a - b) / denom;
}

// Checks every entry of `param` against finite differences.
// Returns the worst relative error.
inline double max_grad_error(const std::function<double()>& forward,
                             decoar::Tensor param,
                             std::span<const double> analytic,
                             double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double fd = finite_difference(forward, param, i, h);
    worst = std::max(worst, rel_err(analytic[i], fd));
  }
  return worst;
}

// --- CTC oracles ------------------------------------------------------------

// Collapses a frame-level path (repeats removed, then blanks dropped).
inline std::vector<std::size_t> collapse_path(const std::vector<std::size_t>& path,
                                              std::size_t blank) {
  std::vector<std::size_t> out;
  std::size_t prev = blank;
  for (const std::size_t s : path) {
    if (s != blank && s != prev) out.push_back(s);
    prev = s;
  }
  return out;
}

// Sum of path probabilities over all (num_classes)^T frame label paths whose
// collapse equals `target`. log_probs is row-major T×num_classes, natural
// logs. Returns the plain (non-log) probability.
inline double brute_force_ctc_probability(const std::vector<double>& log_probs,
                                          std::size_t frames,
                                          std::size_t num_classes,
                                          const std::vector<std::size_t>& target) {
  const std::size_t blank = num_classes - 1;
  double total = 0.0;
  std::vector<std::size_t> path(frames, 0);
  while (true) {
    if (collapse_path(path, blank) == target) {
      double lp = 0.0;
      for (std::size_t t = 0; t < frames; ++t) lp += log_probs[t * num_classes + path[t]];
      total += std::exp(lp);
    }
    // advance odometer
    std::size_t pos = 0;
    while (pos < frames) {
      if (++path[pos] < num_classes) break;
      path[pos] = 0;
      ++pos;
    }
    if (pos == frames) break;
  }
  return total;
}

// Exact marginal probability of every collapsed labeling, by enumeration.
inline std::map<std::vector<std::size_t>, double> brute_force_labeling_marginals(
    const std::vector<double>& log_probs, std::size_t frames,
    std::size_t num_classes) {
  const std::size_t blank = num_classes - 1;
  std::map<std::vector<std::size_t>, double> marg;
  std::vector<std::size_t> path(frames, 0);
  while (true) {
    double lp = 0.0;
    for (std::size_t t = 0; t < frames; ++t) lp += log_probs[t * num_classes + path[t]];
    marg[collapse_path(path, blank)] += std::exp(lp);
    std::size_t pos = 0;
    while (pos < frames) {
      if (++path[pos] < num_classes) break;
      path[pos] = 0;
      ++pos;
    }
    if (pos == frames) break;
  }
  return marg;
}

}  // namespace oracles
