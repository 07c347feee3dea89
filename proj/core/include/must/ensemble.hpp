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

#ifndef MUST_ENSEMBLE_HPP
#define MUST_ENSEMBLE_HPP

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "must/posteriors.hpp"

namespace must {

/// Teacher weighting/selection strategies:
///   ta  - teacher averaging: uniform weights
///   fwm - frame-wise max: per frame, copy the most confident teacher's row
///   es  - elitist sampling: per utterance, the most confident teacher
///   saw - self-adaptive weighting: softmax of tau^(mean max posterior)
///   ftw - fine-tuned weights: fixed user-supplied weights
///   st  - single teacher: the source with the best mapping accuracy
enum class StrategyKind { kTa, kFwm, kEs, kSaw, kFtw, kSt };

/// Canonical lower-case tag used in configs and report rows.
std::string strategy_name(StrategyKind kind);
/// Inverse of strategy_name; unknown tags are rejected.
StrategyKind parse_strategy(const std::string& tag);

struct WeightingStrategy {
  StrategyKind kind = StrategyKind::kTa;
  double tau = 10.0;                  // saw
  std::vector<double> fixed_weights;  // ftw
  std::string selected_teacher;       // st: source language tag
};

/// Aligned soft-label candidates from K teachers, all expressed over the
/// same target vocabulary with identical frame counts.
struct TeacherOutputs {
  std::vector<std::string> teacher_ids;
  std::vector<PosteriorSequence> posteriors;

  std::size_t size() const { return posteriors.size(); }
};

/// Rejects empty ensembles, id/posterior count mismatches, duplicate ids,
/// invalid rows, and length/dimension/language misalignment.
void validate_teacher_outputs(const TeacherOutputs& outputs);

/// Uniform weights 1/K.
std::vector<double> weights_ta(std::size_t k);

/// Mean over frames of the per-frame maximum posterior; the per-teacher
/// confidence statistic behind saw and es.
double mean_max_confidence(const PosteriorSequence& p);

/// Confidence-softmax weights W_k = tau^mu_k / sum_j tau^mu_j with mu the
/// mean max posterior. tau = 1 collapses to uniform; tau > 1 orders the
/// weights like the confidences.
std::vector<double> weights_saw(const TeacherOutputs& outputs, double tau);

/// Per-frame hard selection: each output row is copied from the teacher
/// with the largest posterior maximum at that frame (ties go to the lowest
/// teacher index).
PosteriorSequence select_fwm(const TeacherOutputs& outputs);

/// Index of the teacher with the highest mean max posterior for this
/// utterance (ties go to the lowest index).
std::size_t select_es(const TeacherOutputs& outputs);

/// Source tag with the highest mapping accuracy (ties go to the
/// lexicographically smallest tag). The table must be non-empty.
std::string select_st(const std::map<std::string, double>& accuracy_by_source);

/// Frame-wise convex combination of the teacher posteriors. Weights must be
/// non-negative and sum to 1 within 1e-9. Zero weights are skipped, so a
/// one-hot weight vector returns that teacher's rows verbatim.
PosteriorSequence fuse(const TeacherOutputs& outputs,
                       const std::vector<double>& weights);

}  // namespace must

#endif  // MUST_ENSEMBLE_HPP
