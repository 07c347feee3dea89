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

#ifndef MUST_ASR_HPP
#define MUST_ASR_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "must/posteriors.hpp"
#include "must/synth.hpp"
#include "must/tensor.hpp"

namespace must {

/// Character inventory of one language's model. The CTC blank occupies the
/// last output index and is not a member of `characters`.
struct Vocab {
  std::u32string characters;  // unique, ordered

  std::size_t blank_index() const { return characters.size(); }
  std::size_t dim() const { return characters.size() + 1; }
  /// Character indices of a transcript; rejects characters outside the vocab.
  std::vector<int> encode(const std::u32string& s) const;
};

/// Hybrid CTC/attention recognizer for one language: a bidirectional
/// recurrent encoder, an affine CTC head over the encoder states, and a
/// recurrent decoder with dot-product attention. The frame rate is
/// preserved end to end: T input frames yield exactly T posterior rows.
struct AsrModel {
  std::string language_id;
  std::size_t feature_dim = 0;  // F
  std::size_t hidden = 0;       // H per encoder direction
  Vocab vocab;
  std::map<std::string, Tensor> params;

  std::size_t output_dim() const { return vocab.dim(); }
};

struct TrainHyper {
  double alpha = 0.3;   // CTC share of the composite loss
  double lambda = 0.0;  // distillation share inside the sequence branch
  std::size_t epochs = 1;
  double lr = 0.05;
  std::size_t hidden = 24;
  double clip_norm = 5.0;  // global gradient-norm ceiling
  std::uint64_t seed = 0;
  Vocab vocab;
};

/// One training-step record; the audit surface for recomposing the total
/// loss from its logged components.
struct BatchLogRow {
  std::size_t epoch = 0;  // 1-based
  std::size_t batch = 0;  // 0-based within the epoch
  std::string utt_id;
  double l_ctc = 0.0;
  double l_ce = 0.0;
  double l_kd = 0.0;
  double total = 0.0;
  std::vector<double> teacher_weights;  // empty when no distillation ran
};

/// Provides per-utterance soft labels: (weight, T x d posterior matrix)
/// pairs, already strategy-weighted. Invoked once per training step.
using SoftLabelFn =
    std::function<std::vector<std::pair<double, Tensor>>(const Utterance&)>;

/// Shared training loop behind both the monolingual recipe and the
/// distillation recipe. With lambda == 0 or no soft-label source the
/// distillation branch is never constructed, so those runs are bit-for-bit
/// the monolingual ones. One utterance per batch; plain SGD with global
/// gradient-norm clipping.
AsrModel train_asr_loop(const std::vector<Utterance>& corpus,
                        const TrainHyper& hyper, const SoftLabelFn& soft_labels,
                        std::vector<BatchLogRow>* log);

/// Monolingual recipe: alpha * ctc + (1 - alpha) * attention cross-entropy.
AsrModel train_asr(const std::vector<Utterance>& corpus,
                   const TrainHyper& hyper,
                   std::vector<BatchLogRow>* log = nullptr);

/// Softmax of the CTC-head logits per frame.
PosteriorSequence frame_posteriors(const AsrModel& model, const Utterance& utt);

/// Per-frame argmax, collapse repeats, drop blanks.
std::u32string greedy_ctc_decode(const PosteriorSequence& posts,
                                 const Vocab& vocab);

/// Joint decoding: beam search over decoder steps scoring hypotheses by
/// gamma * log P_ctc + (1 - gamma) * log P_attention, with CTC prefix
/// scores maintained per hypothesis. gamma == 1 short-circuits to greedy
/// CTC collapse. Hypothesis length is capped at twice the frame count.
std::u32string decode(const AsrModel& model, const Utterance& utt,
                      double gamma, std::size_t beam_size = 4);

/// Checkpoint plus a UTF-8 JSON sidecar at `<path>.json` carrying
/// language_id, vocab characters in order, F, H, and the output dimension.
void save_asr_model(const AsrModel& model, const std::string& path);
AsrModel load_asr_model(const std::string& path);

}  // namespace must

#endif  // MUST_ASR_HPP
