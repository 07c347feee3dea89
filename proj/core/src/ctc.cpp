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

#include "must/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "must/errors.hpp"

namespace must::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

}  // namespace

std::size_t min_frames(const std::vector<int>& targets) {
  std::size_t n = targets.size();
  for (std::size_t i = 1; i < targets.size(); ++i) {
    if (targets[i] == targets[i - 1]) ++n;
  }
  return n;
}

CtcResult ctc_loss(const Tensor& logits, const std::vector<int>& targets) {
  if (logits.rank() != 2) {
    throw NumericalError("ctc_loss: logits must be rank 2, got shape " +
                         logits.shape_str());
  }
  const std::size_t T = logits.rows();
  const std::size_t d = logits.cols();
  if (d < 2) {
    throw NumericalError("ctc_loss: need at least one label class plus blank");
  }
  const int blank = static_cast<int>(d) - 1;
  for (int y : targets) {
    if (y < 0 || y >= blank) {
      throw NumericalError("ctc_loss: target index " + std::to_string(y) +
                           " outside [0, " + std::to_string(blank) +
                           "), blank may not appear in targets");
    }
  }
  const std::size_t need = min_frames(targets);
  if (T < need) {
    throw NumericalError(
        "ctc_loss: no valid alignment, target needs at least " +
        std::to_string(need) + " frames but got " + std::to_string(T));
  }

  // Row-wise log-softmax with max subtraction.
  Tensor ly = Tensor::zeros({T, d});
  for (std::size_t t = 0; t < T; ++t) {
    double mx = logits.at(t, 0);
    for (std::size_t k = 1; k < d; ++k) mx = std::max(mx, logits.at(t, k));
    double z = 0.0;
    for (std::size_t k = 0; k < d; ++k) z += std::exp(logits.at(t, k) - mx);
    const double lz = mx + std::log(z);
    for (std::size_t k = 0; k < d; ++k) ly.at(t, k) = logits.at(t, k) - lz;
  }

  // Extended target: blanks interleaved around every label.
  const std::size_t L = targets.size();
  const std::size_t S = 2 * L + 1;
  auto label = [&](std::size_t s) -> int {
    return (s % 2 == 1) ? targets[(s - 1) / 2] : blank;
  };

  std::vector<std::vector<double>> alpha(T, std::vector<double>(S, kNegInf));
  alpha[0][0] = ly.at(0, static_cast<std::size_t>(blank));
  if (S > 1) alpha[0][1] = ly.at(0, static_cast<std::size_t>(label(1)));
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = alpha[t - 1][s];
      if (s >= 1) acc = log_add(acc, alpha[t - 1][s - 1]);
      if (s >= 2 && label(s) != blank && label(s) != label(s - 2)) {
        acc = log_add(acc, alpha[t - 1][s - 2]);
      }
      if (acc != kNegInf) {
        alpha[t][s] = acc + ly.at(t, static_cast<std::size_t>(label(s)));
      }
    }
  }
  double log_z = alpha[T - 1][S - 1];
  if (S > 1) log_z = log_add(log_z, alpha[T - 1][S - 2]);
  if (log_z == kNegInf) {
    throw NumericalError("ctc_loss: no valid alignment has nonzero mass");
  }

  std::vector<std::vector<double>> beta(T, std::vector<double>(S, kNegInf));
  beta[T - 1][S - 1] = ly.at(T - 1, static_cast<std::size_t>(label(S - 1)));
  if (S > 1) {
    beta[T - 1][S - 2] = ly.at(T - 1, static_cast<std::size_t>(label(S - 2)));
  }
  for (std::size_t ti = T - 1; ti-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = beta[ti + 1][s];
      if (s + 1 < S) acc = log_add(acc, beta[ti + 1][s + 1]);
      if (s + 2 < S && label(s) != blank && label(s) != label(s + 2)) {
        acc = log_add(acc, beta[ti + 1][s + 2]);
      }
      if (acc != kNegInf) {
        beta[ti][s] = acc + ly.at(ti, static_cast<std::size_t>(label(s)));
      }
    }
  }

  // grad[t][k] = softmax[t][k] - (1/Z) sum_{s: label(s)=k} alpha beta / y_k.
  CtcResult out;
  out.loss = -log_z;
  out.grad = Tensor::zeros({T, d});
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> log_q(d, kNegInf);
    for (std::size_t s = 0; s < S; ++s) {
      const auto k = static_cast<std::size_t>(label(s));
      if (alpha[t][s] == kNegInf || beta[t][s] == kNegInf) continue;
      log_q[k] = log_add(log_q[k], alpha[t][s] + beta[t][s] - ly.at(t, k));
    }
    for (std::size_t k = 0; k < d; ++k) {
      const double p = std::exp(ly.at(t, k));
      const double q = (log_q[k] == kNegInf) ? 0.0 : std::exp(log_q[k] - log_z);
      out.grad.at(t, k) = p - q;
    }
  }
  if (!out.grad.all_finite()) {
    throw NumericalError("ctc_loss: non-finite gradient");
  }
  return out;
}

}  // namespace must::ctc
