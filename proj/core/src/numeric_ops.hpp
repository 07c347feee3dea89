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

#ifndef MUST_SRC_NUMERIC_OPS_HPP
#define MUST_SRC_NUMERIC_OPS_HPP

// Plain (non-differentiated) mirrors of the graph operations, used on the
// inference paths. Loop nests and accumulation order match the graph
// implementations exactly, so a numeric forward pass reproduces a graph
// forward pass bit for bit.

#include <cmath>

#include "must/errors.hpp"
#include "must/tensor.hpp"

namespace must::num {

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw NumericalError("matmul: inner dimensions differ");
  }
  Tensor out = Tensor::zeros({a.rows(), b.cols()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double av = a.at(r, j);
      if (av == 0.0) continue;
      for (std::size_t c = 0; c < b.cols(); ++c) {
        out.at(r, c) += av * b.at(j, c);
      }
    }
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  Tensor out = Tensor::zeros({a.cols(), a.rows()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out.at(c, r) = a.at(r, c);
  }
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw NumericalError("add: operand shapes differ");
  }
  Tensor out = Tensor::zeros({a.rows(), a.cols()});
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = a.data[i] + b.data[i];
  }
  return out;
}

inline Tensor add_row_vec(const Tensor& a, const Tensor& v) {
  Tensor out = Tensor::zeros({a.rows(), a.cols()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      out.at(r, c) = a.at(r, c) + v.at(0, c);
    }
  }
  return out;
}

inline Tensor tanh(const Tensor& a) {
  Tensor out = Tensor::zeros({a.rows(), a.cols()});
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::tanh(a.data[i]);
  return out;
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  Tensor out = Tensor::zeros({a.rows(), a.cols() + b.cols()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out.at(r, c) = a.at(r, c);
    for (std::size_t c = 0; c < b.cols(); ++c) out.at(r, a.cols() + c) = b.at(r, c);
  }
  return out;
}

inline Tensor softmax_rows(const Tensor& a, bool log_domain = false) {
  Tensor out = Tensor::zeros({a.rows(), a.cols()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double mx = a.at(r, 0);
    for (std::size_t c = 1; c < a.cols(); ++c) mx = std::max(mx, a.at(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) z += std::exp(a.at(r, c) - mx);
    const double lz = mx + std::log(z);
    for (std::size_t c = 0; c < a.cols(); ++c) {
      const double l = a.at(r, c) - lz;
      out.at(r, c) = log_domain ? l : std::exp(l);
    }
  }
  return out;
}

/// One tanh recurrence step: tanh(x * wx + h * wh + b).
inline Tensor rnn_step(const Tensor& x, const Tensor& h, const Tensor& wx,
                       const Tensor& wh, const Tensor& b) {
  return tanh(add(add(matmul(x, wx), matmul(h, wh)), b));
}

/// Bidirectional tanh RNN over the rows of `xs`; returns T x 2H states
/// (forward direction in the left half).
inline Tensor bidir_rnn(const Tensor& xs, const Tensor& fwd_wx,
                        const Tensor& fwd_wh, const Tensor& fwd_b,
                        const Tensor& bwd_wx, const Tensor& bwd_wh,
                        const Tensor& bwd_b) {
  const std::size_t t_len = xs.rows();
  const std::size_t h_dim = fwd_wx.cols();
  std::vector<Tensor> fwd(t_len), bwd(t_len);
  Tensor h = Tensor::zeros({1, h_dim});
  for (std::size_t t = 0; t < t_len; ++t) {
    Tensor x = Tensor::zeros({1, xs.cols()});
    for (std::size_t c = 0; c < xs.cols(); ++c) x.at(0, c) = xs.at(t, c);
    h = rnn_step(x, h, fwd_wx, fwd_wh, fwd_b);
    fwd[t] = h;
  }
  h = Tensor::zeros({1, h_dim});
  for (std::size_t t = t_len; t-- > 0;) {
    Tensor x = Tensor::zeros({1, xs.cols()});
    for (std::size_t c = 0; c < xs.cols(); ++c) x.at(0, c) = xs.at(t, c);
    h = rnn_step(x, h, bwd_wx, bwd_wh, bwd_b);
    bwd[t] = h;
  }
  Tensor out = Tensor::zeros({t_len, 2 * h_dim});
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t c = 0; c < h_dim; ++c) {
      out.at(t, c) = fwd[t].at(0, c);
      out.at(t, h_dim + c) = bwd[t].at(0, c);
    }
  }
  return out;
}

}  // namespace must::num

#endif  // MUST_SRC_NUMERIC_OPS_HPP
