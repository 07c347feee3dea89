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

#ifndef MUST_DISTILL_HPP
#define MUST_DISTILL_HPP

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "must/asr.hpp"
#include "must/ensemble.hpp"
#include "must/mesd.hpp"
#include "must/posteriors.hpp"

namespace must {

/// A frozen source-language recognizer composed with a frozen mapping
/// model; its output posteriors live in the target vocabulary and serve as
/// soft labels for the student.
struct TeacherPipeline {
  AsrModel source_asr;
  MesdModel mapping;
  std::string source_language;
  std::string target_language;
};

/// Rejects pipelines whose mapping targets a different language or lacks an
/// encoder for the source, or whose recognizer is for the wrong language.
void validate_pipeline(const TeacherPipeline& pipeline);

/// Decodes the utterance with the source recognizer and maps the resulting
/// posteriors into the target vocabulary. Length-preserving.
PosteriorSequence teacher_soft_labels(const TeacherPipeline& pipeline,
                                      const Utterance& utt);

/// Sum over frames of KL(teacher_t || student_t); non-negative, zero iff
/// the sequences match. Frame counts and dimensions must agree.
double kd_loss(const PosteriorSequence& student,
               const PosteriorSequence& teacher);

/// Distillation loss of the whole ensemble under a strategy: a weighted sum
/// of per-teacher losses for ta/saw/ftw, the selected teacher's loss for
/// es/st, and the loss against the frame-selected sequence for fwm.
double ensemble_kd_loss(const PosteriorSequence& student,
                        const TeacherOutputs& outputs,
                        const WeightingStrategy& strategy);

/// alpha * l_ctc + (1 - alpha) * (lambda * l_kd + (1 - lambda) * l_ce),
/// evaluated with the same operation order as the training graph so logged
/// components recompose to the logged total exactly.
double must_total_loss(double l_ctc, double l_ce, double l_kd, double alpha,
                       double lambda);

struct DistillConfig {
  TrainHyper hyper;  // alpha, lambda, epochs, lr, hidden, clip_norm, seed
  WeightingStrategy strategy;
  /// Memoize soft labels by utterance id across epochs. The teachers are
  /// frozen, so this changes wall-clock only, never results.
  bool cache_soft_labels = false;
};

/// Trains a student recognizer on the corpus, attaching the ensemble
/// distillation term to the student's frame-level posteriors. With
/// lambda = 0 the teachers are never evaluated and the run is bit-identical
/// to train_asr under the same hyperparameters. `teacher_invocations`
/// counts soft-label evaluations per source language.
AsrModel train_student(
    const std::vector<Utterance>& corpus,
    const std::vector<TeacherPipeline>& pipelines, const DistillConfig& config,
    std::vector<BatchLogRow>* log = nullptr,
    std::map<std::string, std::size_t>* teacher_invocations = nullptr);

}  // namespace must

#endif  // MUST_DISTILL_HPP
