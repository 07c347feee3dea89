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

#ifndef MUST_CTC_HPP
#define MUST_CTC_HPP

#include <vector>

#include "must/tensor.hpp"

namespace must::ctc {

struct CtcResult {
  double loss = 0.0;  // negative log probability of the target labelling
  Tensor grad;        // d loss / d logits, same shape as the logits
};

/// Fewest frames admitting a valid alignment: the target length plus one
/// extra frame per adjacent repeated label.
std::size_t min_frames(const std::vector<int>& targets);

/// CTC loss by the forward-backward recursion in log space.
///
/// `logits` are pre-softmax scores, one row per frame, with the blank as
/// the last class. `targets` are label indices (all < blank). Rejects
/// targets that admit no valid alignment and indices at or above the blank.
CtcResult ctc_loss(const Tensor& logits, const std::vector<int>& targets);

}  // namespace must::ctc

#endif  // MUST_CTC_HPP
