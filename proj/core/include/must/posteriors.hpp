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

#ifndef MUST_POSTERIORS_HPP
#define MUST_POSTERIORS_HPP

#include <cstddef>
#include <string>

#include "must/tensor.hpp"

namespace must {

/// Per-frame probability distributions over an output vocabulary: one row
/// per frame, each row non-negative and summing to 1 within 1e-9. The
/// language tag names the vocabulary the columns are expressed in.
struct PosteriorSequence {
  Tensor frames;  // T x d
  std::string language_id;

  std::size_t length() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
};

/// Throws when a row is negative, fails to sum to 1 within 1e-9, or the
/// sequence is empty.
void validate_posteriors(const PosteriorSequence& p);

/// Column of the largest value in row r; ties go to the lowest index.
std::size_t argmax_row(const Tensor& m, std::size_t r);

/// Sum over frames of the Kullback-Leibler divergence KL(p_t || q_t), with
/// 0 log 0 := 0 and logs floored at 1e-12. Both matrices must be the same
/// shape and hold one distribution per row.
double kl_frames(const Tensor& p, const Tensor& q);

}  // namespace must

#endif  // MUST_POSTERIORS_HPP
