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

#include "must/ensemble.hpp"

#include <cmath>
#include <set>

#include "must/errors.hpp"

namespace must {

std::string strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kTa: return "ta";
    case StrategyKind::kFwm: return "fwm";
    case StrategyKind::kEs: return "es";
    case StrategyKind::kSaw: return "saw";
    case StrategyKind::kFtw: return "ftw";
    case StrategyKind::kSt: return "st";
  }
  throw Error("unreachable strategy kind");
}

StrategyKind parse_strategy(const std::string& tag) {
  if (tag == "ta") return StrategyKind::kTa;
  if (tag == "fwm") return StrategyKind::kFwm;
  if (tag == "es") return StrategyKind::kEs;
  if (tag == "saw") return StrategyKind::kSaw;
  if (tag == "ftw") return StrategyKind::kFtw;
  if (tag == "st") return StrategyKind::kSt;
  throw ConfigError("unknown strategy '" + tag +
                    "' (expected ta, fwm, es, saw, ftw, or st)");
}

void validate_teacher_outputs(const TeacherOutputs& outputs) {
  if (outputs.posteriors.empty()) {
    throw ConfigError("teacher ensemble is empty");
  }
  if (outputs.teacher_ids.size() != outputs.posteriors.size()) {
    throw ConfigError("teacher ids and posterior sequences differ in count");
  }
  std::set<std::string> seen;
  for (const std::string& id : outputs.teacher_ids) {
    if (!seen.insert(id).second) {
      throw ConfigError("duplicate teacher id '" + id + "'");
    }
  }
  const PosteriorSequence& first = outputs.posteriors.front();
  for (std::size_t k = 0; k < outputs.posteriors.size(); ++k) {
    const PosteriorSequence& p = outputs.posteriors[k];
    validate_posteriors(p);
    if (p.length() != first.length() || p.dim() != first.dim()) {
      throw NumericalError("teacher '" + outputs.teacher_ids[k] +
                           "' is misaligned: " + std::to_string(p.length()) +
                           "x" + std::to_string(p.dim()) + " vs " +
                           std::to_string(first.length()) + "x" +
                           std::to_string(first.dim()));
    }
    if (p.language_id != first.language_id) {
      throw ConfigError("teacher '" + outputs.teacher_ids[k] +
                        "' emits vocabulary '" + p.language_id +
                        "', ensemble expects '" + first.language_id + "'");
    }
  }
}

std::vector<double> weights_ta(std::size_t k) {
  if (k < 1) throw ConfigError("weights_ta: ensemble size must be >= 1");
  return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

double mean_max_confidence(const PosteriorSequence& p) {
  if (p.length() == 0) {
    throw NumericalError("mean_max_confidence: empty posterior sequence");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < p.length(); ++t) {
    total += p.frames.at(t, argmax_row(p.frames, t));
  }
  return total / static_cast<double>(p.length());
}

std::vector<double> weights_saw(const TeacherOutputs& outputs, double tau) {
  validate_teacher_outputs(outputs);
  if (!(tau > 0.0)) throw ConfigError("saw temperature must be > 0");
  std::vector<double> w(outputs.size());
  double z = 0.0;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    w[k] = std::pow(tau, mean_max_confidence(outputs.posteriors[k]));
    z += w[k];
  }
  for (double& v : w) v /= z;
  return w;
}

PosteriorSequence select_fwm(const TeacherOutputs& outputs) {
  validate_teacher_outputs(outputs);
  const std::size_t t_len = outputs.posteriors.front().length();
  const std::size_t d = outputs.posteriors.front().dim();
  PosteriorSequence out;
  out.frames = Tensor::zeros({t_len, d});
  out.language_id = outputs.posteriors.front().language_id;
  for (std::size_t t = 0; t < t_len; ++t) {
    std::size_t best = 0;
    double best_max = -1.0;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      const Tensor& frames = outputs.posteriors[k].frames;
      const double m = frames.at(t, argmax_row(frames, t));
      if (m > best_max) {
        best_max = m;
        best = k;
      }
    }
    const Tensor& src = outputs.posteriors[best].frames;
    for (std::size_t c = 0; c < d; ++c) out.frames.at(t, c) = src.at(t, c);
  }
  return out;
}

std::size_t select_es(const TeacherOutputs& outputs) {
  validate_teacher_outputs(outputs);
  std::size_t best = 0;
  double best_mu = mean_max_confidence(outputs.posteriors[0]);
  for (std::size_t k = 1; k < outputs.size(); ++k) {
    const double mu = mean_max_confidence(outputs.posteriors[k]);
    if (mu > best_mu) {
      best_mu = mu;
      best = k;
    }
  }
  return best;
}

std::string select_st(
    const std::map<std::string, double>& accuracy_by_source) {
  if (accuracy_by_source.empty()) {
    throw ConfigError("select_st: mapping accuracy table is empty");
  }
  // The map iterates tags in ascending order, so keeping the first strict
  // maximum breaks ties toward the lexicographically smallest tag.
  std::string best_tag;
  double best = 0.0;
  bool have = false;
  for (const auto& [tag, ratio] : accuracy_by_source) {
    if (!have || ratio > best) {
      have = true;
      best = ratio;
      best_tag = tag;
    }
  }
  return best_tag;
}

PosteriorSequence fuse(const TeacherOutputs& outputs,
                       const std::vector<double>& weights) {
  validate_teacher_outputs(outputs);
  if (weights.size() != outputs.size()) {
    throw NumericalError("fuse: " + std::to_string(weights.size()) +
                         " weights for " + std::to_string(outputs.size()) +
                         " teachers");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw NumericalError("fuse: negative teacher weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw NumericalError("fuse: teacher weights sum to " +
                         std::to_string(sum) + ", expected 1");
  }
  const std::size_t t_len = outputs.posteriors.front().length();
  const std::size_t d = outputs.posteriors.front().dim();
  PosteriorSequence out;
  out.frames = Tensor::zeros({t_len, d});
  out.language_id = outputs.posteriors.front().language_id;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    if (weights[k] == 0.0) continue;  // keeps one-hot fusion verbatim
    const Tensor& frames = outputs.posteriors[k].frames;
    for (std::size_t i = 0; i < out.frames.data.size(); ++i) {
      out.frames.data[i] += weights[k] * frames.data[i];
    }
  }
  return out;
}

}  // namespace must
