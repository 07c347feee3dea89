// Copyright 2026 The MUST Authors
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

// Reference implementations kept deliberately naive and slow. Tests compare
// the library's fast paths against these, so nothing here may call into the
// code under test.

#ifndef MUST_TESTS_SUPPORT_ORACLES_HPP
#define MUST_TESTS_SUPPORT_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "must/tensor.hpp"

namespace oracle {

/// Row-wise softmax in plain probability space.
inline std::vector<std::vector<double>> softmax(const must::Tensor& logits) {
  std::vector<std::vector<double>> out(
      logits.rows(), std::vector<double>(logits.cols(), 0.0));
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double mx = logits.at(r, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      mx = std::max(mx, logits.at(r, c));
    }
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      out[r][c] = std::exp(logits.at(r, c) - mx);
      z += out[r][c];
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) out[r][c] /= z;
  }
  return out;
}

/// Collapses an alignment path: merge repeats, then drop blanks.
inline std::vector<int> collapse(const std::vector<int>& path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != blank) out.push_back(s);
    prev = s;
  }
  return out;
}

/// Total probability of `targets` by brute-force enumeration of every
/// alignment path. Exponential in the frame count; fine for T <= 6.
inline double ctc_path_probability(const must::Tensor& logits,
                                   const std::vector<int>& targets) {
  const auto p = softmax(logits);
  const int d = static_cast<int>(logits.cols());
  const int blank = d - 1;
  const std::size_t t_len = logits.rows();
  double total = 0.0;
  std::vector<int> path(t_len, 0);
  std::function<void(std::size_t, double)> walk = [&](std::size_t t,
                                                      double prob) {
    if (t == t_len) {
      if (collapse(path, blank) == targets) total += prob;
      return;
    }
    for (int s = 0; s < d; ++s) {
      path[t] = s;
      walk(t + 1, prob * p[t][static_cast<std::size_t>(s)]);
    }
  };
  walk(0, 1.0);
  return total;
}

/// Levenshtein distance by memoized three-way recursion.
inline std::size_t edit_distance_slow(const std::u32string& a,
                                      const std::u32string& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go =
      [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    const auto key = std::make_pair(i, j);
    if (const auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, 1 + go(i + 1, j));
    best = std::min(best, 1 + go(i, j + 1));
    memo[key] = best;
    return best;
  };
  return go(0, 0);
}

/// Central-difference gradient of a scalar function over a flat vector.
inline std::vector<double> central_diff(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h) {
  std::vector<double> grad(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f(x);
    x[i] = keep - h;
    const double fm = f(x);
    x[i] = keep;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

/// Relative error with an absolute floor of one, so tiny gradients compare
/// absolutely and large ones relatively.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace oracle

#endif  // MUST_TESTS_SUPPORT_ORACLES_HPP
