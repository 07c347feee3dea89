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

#ifndef MUST_HARNESS_HPP
#define MUST_HARNESS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace must {

/// Everything a full experiment needs, parsed from one JSON config file.
/// The canonical serialization (sorted keys, default-filled) is hashed into
/// every artifact manifest, so artifacts are bound to the exact
/// configuration that produced them.
struct ExperimentConfig {
  // corpus
  std::vector<std::string> languages{"lat", "gre", "cyr"};  // 2..5 tags
  std::string target = "cyr";  // must appear in languages
  std::map<std::string, double> overlaps{                   // "<a>-<b>", a < b
      {"cyr-gre", 0.25}, {"cyr-lat", 0.75}, {"gre-lat", 0.5}};
  std::size_t inventory_size = 12;
  std::size_t feature_dim = 8;
  std::size_t min_duration = 2;
  std::size_t max_duration = 4;
  double noise_stddev = 0.3;
  std::size_t min_phonemes = 3;
  std::size_t max_phonemes = 8;
  std::size_t train_utts = 160;
  std::size_t dev_utts = 24;
  std::size_t eval_utts = 32;
  /// Share of the target train split available to students; the rest is
  /// treated as untranscribed and only reaches the mapping stage.
  double target_train_fraction = 0.25;
  std::size_t mapping_train_utts = 120;

  // model
  std::size_t hidden = 24;          // recognizer encoder width per direction
  std::size_t mapping_hidden = 32;  // mapping model width per direction

  // training
  double alpha = 0.3;
  double lambda = 0.5;
  double gamma = 0.7;
  double saw_tau = 10.0;
  // One weight per source language, in config order.
  std::vector<double> ftw_weights{0.5, 0.5};
  std::size_t asr_epochs = 3;
  double asr_lr = 0.05;
  std::size_t mapping_epochs = 3;
  double mapping_lr = 0.05;
  bool rank_weighting = true;
  std::size_t student_epochs = 3;
  double student_lr = 0.05;
  double clip_norm = 5.0;
  bool cache_soft_labels = true;
  std::uint64_t seed = 0;

  // decode
  std::size_t beam_size = 4;

  // Table rows; any subset of the six tags.
  std::vector<std::string> strategies{"ta", "fwm", "es", "saw", "ftw", "st"};
  std::string out_dir = "out";
};

/// Parses and validates a config from JSON text. Unknown keys and
/// out-of-range values are rejected with the offending dotted path.
ExperimentConfig parse_config(const std::string& json_text);

/// Canonical JSON serialization: sorted keys, two-space indent, trailing
/// newline. parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// SHA-256 of the canonical serialization.
std::string config_hash(const ExperimentConfig& cfg);

/// Reads a config file, applies dotted-path overrides ("training.lambda=0.7";
/// values parse as JSON, falling back to plain strings), then honors the
/// MUST_OUT environment variable before validating.
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {});

/// The pipeline stages in dependency order.
const std::vector<std::string>& stage_names();

/// Runs one stage: verifies its dependencies' artifact hashes, skips the
/// body when an up-to-date manifest already covers it, and otherwise writes
/// artifacts plus a provenance manifest under <out_dir>/manifests/.
/// `force` permits overwriting artifacts from a different config.
void run_stage(const ExperimentConfig& cfg, const std::string& stage,
               bool force = false);

/// All stages in order.
void run_all(const ExperimentConfig& cfg, bool force = false);

}  // namespace must

#endif  // MUST_HARNESS_HPP
