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

#ifndef MUST_MESD_HPP
#define MUST_MESD_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "must/asr.hpp"
#include "must/posteriors.hpp"
#include "must/synth.hpp"
#include "must/tensor.hpp"

namespace must {

/// Posterior mapping model: one bidirectional recurrent encoder per source
/// language, a language switch selecting exactly one encoder's projected
/// embeddings, and a shared bidirectional recurrent decoder emitting
/// target-vocabulary distributions. Any single encoder suffices at
/// inference time.
struct MesdModel {
  std::string target_language;
  std::vector<std::string> source_languages;       // encoder order
  std::map<std::string, std::size_t> input_dims;   // d_S per source
  std::size_t hidden = 0;                          // H_m per direction
  std::size_t output_dim = 0;                      // d_A
  std::map<std::string, Tensor> params;
};

/// Sum over frames of KL(target_t || mapped_t); the mapping model's
/// training objective. Dimensions and lengths must agree.
double kl_frame_loss(const PosteriorSequence& target,
                     const PosteriorSequence& mapped);

/// Rank-based loss weights: the k losses are ranked descending (rank 1 is
/// the largest, ties resolved toward the earlier index) and rank r receives
/// 2(K+1-r)/(K(K+1)). The weights always sum to 1 and larger losses get
/// larger weights.
std::vector<double> rank_sum_weights(const std::vector<double>& losses);

/// Routes the source posteriors through that language's encoder and the
/// shared decoder. Length-preserving; rows are valid distributions.
PosteriorSequence map_posteriors(const MesdModel& model,
                                 const std::string& source_language,
                                 const PosteriorSequence& source_posts);

struct MesdHyper {
  std::size_t epochs = 10;
  double lr = 0.05;
  std::size_t hidden = 32;  // H_m
  bool rank_weighting = true;  // false => uniform 1/K pair weights
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
};

/// One mapping training step record: per-pair losses (frame-normalized) in
/// source order, the pair weights applied, and their weighted sum.
struct MesdLogRow {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::string utt_id;
  std::vector<double> pair_losses;
  std::vector<double> weights;
  double combined = 0.0;
};

/// Trains the mapping model on target-language utterances. Each utterance
/// is decoded by the frozen target model (the regression target) and every
/// frozen source model (the encoder inputs); the per-pair frame-normalized
/// KL losses are combined with uniform or rank-sum weights per batch.
/// Transcripts are never consulted.
MesdModel train_mesd(const AsrModel& target_asr,
                     const std::vector<AsrModel>& source_asrs,
                     const std::vector<Utterance>& corpus,
                     const MesdHyper& hyper,
                     std::vector<MesdLogRow>* log = nullptr);

struct MappingAccuracy {
  std::size_t correctly_mapped_frames = 0;
  std::size_t total_frames = 0;
  double ratio = 0.0;
};

/// Fraction of frames where the mapped posteriors and the target model's
/// posteriors agree on the most probable class (argmax ties break toward
/// the lowest index on both sides).
MappingAccuracy mapping_accuracy(const MesdModel& model,
                                 const std::string& source_language,
                                 const AsrModel& target_asr,
                                 const AsrModel& source_asr,
                                 const std::vector<Utterance>& corpus);

/// Checkpoint plus a JSON sidecar listing target language, encoder order,
/// and dimensions.
void save_mesd_model(const MesdModel& model, const std::string& path);
MesdModel load_mesd_model(const std::string& path);

}  // namespace must

#endif  // MUST_MESD_HPP
