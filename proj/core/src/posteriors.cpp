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

#include "must/posteriors.hpp"

#include <cmath>

#include "must/errors.hpp"

namespace must {

void validate_posteriors(const PosteriorSequence& p) {
  if (p.frames.rows() < 1 || p.frames.cols() < 1) {
    throw NumericalError("posterior sequence is empty");
  }
  for (std::size_t t = 0; t < p.frames.rows(); ++t) {
    double sum = 0.0;
    for (std::size_t c = 0; c < p.frames.cols(); ++c) {
      const double v = p.frames.at(t, c);
      if (v < 0.0) {
        throw NumericalError("negative posterior at frame " +
                             std::to_string(t));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw NumericalError("posterior row " + std::to_string(t) +
                           " sums to " + std::to_string(sum));
    }
  }
}

std::size_t argmax_row(const Tensor& m, std::size_t r) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < m.cols(); ++c) {
    if (m.at(r, c) > m.at(r, best)) best = c;
  }
  return best;
}

double kl_frames(const Tensor& p, const Tensor& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw NumericalError("KL operands differ in shape: " + p.shape_str() +
                         " vs " + q.shape_str());
  }
  constexpr double kFloor = 1e-12;
  double total = 0.0;
  for (std::size_t t = 0; t < p.rows(); ++t) {
    for (std::size_t c = 0; c < p.cols(); ++c) {
      const double pv = p.at(t, c);
      if (pv <= 0.0) continue;  // 0 log 0 := 0
      const double qv = std::max(q.at(t, c), kFloor);
      total += pv * (std::log(std::max(pv, kFloor)) - std::log(qv));
    }
  }
  return total;
}

}  // namespace must
