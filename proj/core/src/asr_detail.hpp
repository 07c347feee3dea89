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

#ifndef MUST_SRC_ASR_DETAIL_HPP
#define MUST_SRC_ASR_DETAIL_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "must/asr.hpp"
#include "must/autodiff.hpp"
#include "must/tensor.hpp"

namespace must::detail {

struct LossGraph {
  ad::Graph g;
  std::map<std::string, ad::NodeId> param_ids;
  ad::NodeId total = 0;
  ad::NodeId l_ctc = 0;
  ad::NodeId l_ce = 0;
  ad::NodeId l_kd = 0;
  bool has_kd = false;
};

/// Builds the per-utterance composite loss:
///   alpha * l_ctc + (1 - alpha) * (lambda * l_kd + (1 - lambda) * l_ce)
/// with the distillation branch omitted entirely when `soft` is empty, so
/// the monolingual and lambda = 0 paths share one graph shape.
LossGraph build_loss_graph(const AsrModel& model, const Tensor& feats,
                           const std::vector<int>& targets, double alpha,
                           double lambda,
                           const std::vector<std::pair<double, Tensor>>& soft);

struct EncoderOut {
  Tensor states;      // T x 2H
  Tensor ctc_logits;  // T x d
};

/// Numeric encoder + CTC head; bitwise identical to the training graph's
/// forward pass over the same parameters.
EncoderOut run_encoder(const AsrModel& model, const Tensor& feats);

struct DecoderState {
  Tensor s;  // 1 x 2H recurrent state
  Tensor c;  // 1 x 2H attention context
};

DecoderState initial_decoder_state(const AsrModel& model);

/// Advances the attention decoder by one step conditioned on the previous
/// token (blank doubles as the start symbol). Returns the new state and the
/// 1 x d log-probability row for the next token.
std::pair<DecoderState, Tensor> decoder_step(const AsrModel& model,
                                             const Tensor& enc_states,
                                             const DecoderState& prev,
                                             int prev_token);

}  // namespace must::detail

#endif  // MUST_SRC_ASR_DETAIL_HPP
