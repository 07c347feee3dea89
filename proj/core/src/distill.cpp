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

#include "must/distill.hpp"

#include <cmath>
#include <set>

#include "must/errors.hpp"

namespace must {

namespace {

void check_fixed_weights(const std::vector<double>& weights, std::size_t k) {
  if (weights.size() != k) {
    throw ConfigError("ftw: " + std::to_string(weights.size()) +
                      " fixed weights for " + std::to_string(k) + " teachers");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("ftw: weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("ftw: weights sum to " + std::to_string(sum) +
                      ", expected 1");
  }
}

std::size_t teacher_index(const TeacherOutputs& outputs,
                          const std::string& teacher_id) {
  for (std::size_t k = 0; k < outputs.teacher_ids.size(); ++k) {
    if (outputs.teacher_ids[k] == teacher_id) return k;
  }
  throw ConfigError("teacher '" + teacher_id + "' is not in the ensemble");
}

}  // namespace

void validate_pipeline(const TeacherPipeline& pipeline) {
  if (pipeline.source_asr.language_id != pipeline.source_language) {
    throw ConfigError("pipeline recognizer is for '" +
                      pipeline.source_asr.language_id + "', expected '" +
                      pipeline.source_language + "'");
  }
  if (pipeline.mapping.target_language != pipeline.target_language) {
    throw ConfigError("pipeline mapping targets '" +
                      pipeline.mapping.target_language + "', expected '" +
                      pipeline.target_language + "'");
  }
  if (pipeline.mapping.input_dims.find(pipeline.source_language) ==
      pipeline.mapping.input_dims.end()) {
    throw ConfigError("pipeline mapping has no encoder for language '" +
                      pipeline.source_language + "'");
  }
}

PosteriorSequence teacher_soft_labels(const TeacherPipeline& pipeline,
                                      const Utterance& utt) {
  if (utt.language_id != pipeline.target_language) {
    throw ConfigError("utterance '" + utt.utt_id + "' is in language '" +
                      utt.language_id + "', pipeline targets '" +
                      pipeline.target_language + "'");
  }
  const PosteriorSequence source = frame_posteriors(pipeline.source_asr, utt);
  return map_posteriors(pipeline.mapping, pipeline.source_language, source);
}

double kd_loss(const PosteriorSequence& student,
               const PosteriorSequence& teacher) {
  validate_posteriors(student);
  validate_posteriors(teacher);
  if (student.length() != teacher.length() || student.dim() != teacher.dim()) {
    throw NumericalError(
        "kd_loss: misaligned sequences (" + std::to_string(teacher.length()) +
        "x" + std::to_string(teacher.dim()) + " teacher vs " +
        std::to_string(student.length()) + "x" + std::to_string(student.dim()) +
        " student)");
  }
  return kl_frames(teacher.frames, student.frames);
}

double ensemble_kd_loss(const PosteriorSequence& student,
                        const TeacherOutputs& outputs,
                        const WeightingStrategy& strategy) {
  validate_teacher_outputs(outputs);
  switch (strategy.kind) {
    case StrategyKind::kTa:
    case StrategyKind::kSaw:
    case StrategyKind::kFtw: {
      std::vector<double> weights;
      if (strategy.kind == StrategyKind::kTa) {
        weights = weights_ta(outputs.size());
      } else if (strategy.kind == StrategyKind::kSaw) {
        weights = weights_saw(outputs, strategy.tau);
      } else {
        check_fixed_weights(strategy.fixed_weights, outputs.size());
        weights = strategy.fixed_weights;
      }
      double total = 0.0;
      for (std::size_t k = 0; k < outputs.size(); ++k) {
        total += weights[k] * kd_loss(student, outputs.posteriors[k]);
      }
      return total;
    }
    case StrategyKind::kEs:
      return kd_loss(student, outputs.posteriors[select_es(outputs)]);
    case StrategyKind::kSt:
      if (strategy.selected_teacher.empty()) {
        throw ConfigError("strategy st requires a selected teacher");
      }
      return kd_loss(
          student,
          outputs.posteriors[teacher_index(outputs, strategy.selected_teacher)]);
    case StrategyKind::kFwm:
      return kd_loss(student, select_fwm(outputs));
  }
  throw Error("unreachable strategy kind");
}

double must_total_loss(double l_ctc, double l_ce, double l_kd, double alpha,
                       double lambda) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0,1]");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("lambda must lie in [0,1]");
  }
  return l_ctc * alpha + (l_kd * lambda + l_ce * (1.0 - lambda)) * (1.0 - alpha);
}

AsrModel train_student(const std::vector<Utterance>& corpus,
                       const std::vector<TeacherPipeline>& pipelines,
                       const DistillConfig& config,
                       std::vector<BatchLogRow>* log,
                       std::map<std::string, std::size_t>* teacher_invocations) {
  const bool distilling = config.hyper.lambda > 0.0;
  if (distilling && pipelines.empty()) {
    throw ConfigError("distillation with lambda > 0 needs at least one teacher");
  }
  std::set<std::string> seen;
  for (const TeacherPipeline& p : pipelines) {
    validate_pipeline(p);
    if (!corpus.empty() && p.target_language != corpus.front().language_id) {
      throw ConfigError("pipeline targets '" + p.target_language +
                        "', corpus is '" + corpus.front().language_id + "'");
    }
    if (p.mapping.output_dim != config.hyper.vocab.dim()) {
      throw ConfigError("teacher '" + p.source_language + "' emits " +
                        std::to_string(p.mapping.output_dim) +
                        " classes, student has " +
                        std::to_string(config.hyper.vocab.dim()));
    }
    if (!seen.insert(p.source_language).second) {
      throw ConfigError("duplicate teacher for language '" +
                        p.source_language + "'");
    }
  }

  std::size_t st_index = 0;
  if (distilling && config.strategy.kind == StrategyKind::kSt) {
    if (config.strategy.selected_teacher.empty()) {
      throw ConfigError("strategy st requires a selected teacher");
    }
    bool found = false;
    for (std::size_t k = 0; k < pipelines.size(); ++k) {
      if (pipelines[k].source_language == config.strategy.selected_teacher) {
        st_index = k;
        found = true;
        break;
      }
    }
    if (!found) {
      throw ConfigError("selected teacher '" +
                        config.strategy.selected_teacher +
                        "' has no pipeline");
    }
  }
  if (distilling && config.strategy.kind == StrategyKind::kFtw) {
    check_fixed_weights(config.strategy.fixed_weights, pipelines.size());
  }
  if (distilling && config.strategy.kind == StrategyKind::kSaw &&
      !(config.strategy.tau > 0.0)) {
    throw ConfigError("saw temperature must be > 0");
  }

  std::map<std::string, std::vector<std::pair<double, Tensor>>> cache;
  SoftLabelFn soft_labels = [&](const Utterance& utt) {
    if (config.cache_soft_labels) {
      const auto it = cache.find(utt.utt_id);
      if (it != cache.end()) return it->second;
    }
    std::vector<std::pair<double, Tensor>> soft;
    if (config.strategy.kind == StrategyKind::kSt) {
      const TeacherPipeline& p = pipelines[st_index];
      if (teacher_invocations) ++(*teacher_invocations)[p.source_language];
      soft.emplace_back(1.0, teacher_soft_labels(p, utt).frames);
    } else {
      TeacherOutputs outputs;
      for (const TeacherPipeline& p : pipelines) {
        if (teacher_invocations) ++(*teacher_invocations)[p.source_language];
        outputs.teacher_ids.push_back(p.source_language);
        outputs.posteriors.push_back(teacher_soft_labels(p, utt));
      }
      switch (config.strategy.kind) {
        case StrategyKind::kTa:
        case StrategyKind::kSaw:
        case StrategyKind::kFtw: {
          std::vector<double> weights;
          if (config.strategy.kind == StrategyKind::kTa) {
            weights = weights_ta(outputs.size());
          } else if (config.strategy.kind == StrategyKind::kSaw) {
            weights = weights_saw(outputs, config.strategy.tau);
          } else {
            weights = config.strategy.fixed_weights;
          }
          for (std::size_t k = 0; k < outputs.size(); ++k) {
            soft.emplace_back(weights[k], outputs.posteriors[k].frames);
          }
          break;
        }
        case StrategyKind::kEs:
          soft.emplace_back(1.0,
                            outputs.posteriors[select_es(outputs)].frames);
          break;
        case StrategyKind::kFwm:
          soft.emplace_back(1.0, select_fwm(outputs).frames);
          break;
        case StrategyKind::kSt:
          throw Error("unreachable st branch");
      }
    }
    if (config.cache_soft_labels) cache[utt.utt_id] = soft;
    return soft;
  };

  return train_asr_loop(corpus, config.hyper, soft_labels, log);
}

}  // namespace must
