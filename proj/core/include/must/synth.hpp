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

#ifndef MUST_SYNTH_HPP
#define MUST_SYNTH_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "must/tensor.hpp"

namespace must {

// Synthetic multilingual corpus generator. Each language owns a phoneme
// inventory drawn from a family-wide prototype pool; configured pairwise
// overlap fractions control exactly how many prototypes two languages
// share, while every language writes in its own Unicode script so
// character sets never intersect.

/// A language: latent phoneme units, their rendering prototypes, and an
/// injective phoneme-to-character spelling.
struct LanguageSpec {
  std::string language_id;
  std::vector<int> phoneme_inventory;        // global prototype ids, ascending
  std::map<int, char32_t> grapheme_map;      // injective; image == character_set
  std::u32string character_set;              // in inventory order
  std::map<int, Tensor> prototype_bank;      // phoneme id -> 1 x F mean vector
  std::map<int, std::pair<std::size_t, std::size_t>> duration_range;  // frames
  std::size_t feature_dim = 0;
  double noise_stddev = 0.0;
};

struct FamilyConfig {
  std::vector<std::string> language_ids;      // 1..5 distinct tags
  std::vector<std::vector<double>> overlap;   // symmetric, entries in [0,1]
  std::size_t inventory_size = 12;            // phonemes per language, >= 2
  std::size_t feature_dim = 8;
  std::size_t min_duration = 2;               // frames per phoneme
  std::size_t max_duration = 4;
  double noise_stddev = 0.3;
  std::uint64_t seed = 0;
};

/// Builds one LanguageSpec per configured language. For every pair (i, j)
/// the generated inventories share exactly round(overlap[i][j] * inventory)
/// prototype ids. Rejects overlap matrices whose pairwise sharing demands
/// cannot be met by any assignment, naming a violating pair.
std::vector<LanguageSpec> generate_family(const FamilyConfig& cfg);

/// Number of prototype ids two specs have in common.
std::size_t shared_prototypes(const LanguageSpec& a, const LanguageSpec& b);

struct Utterance {
  std::string utt_id;
  std::string language_id;
  Tensor features;  // T x F
  std::u32string transcript;
};

/// Samples a phoneme string of the given length, renders each phoneme as
/// duration * (prototype + white noise), and spells the transcript through
/// the grapheme map. Pure function of (spec, num_phonemes, seed); the
/// default utterance id encodes the seed.
Utterance synthesize_utterance(const LanguageSpec& spec,
                               std::size_t num_phonemes, std::uint64_t seed,
                               const std::string& utt_id = "");

// Feature container: magic "MUSTFEAT", u32 version, u64 T, u64 F, then
// T*F f64 values, all little-endian.
void write_features(const std::string& path, const Tensor& features);
Tensor read_features(const std::string& path);
/// Reads only the header, returning (T, F).
std::pair<std::size_t, std::size_t> read_feature_dims(const std::string& path);

struct ManifestEntry {
  std::string utt_id;
  std::string path;  // relative to the manifest's directory
  std::u32string transcript;
  std::string language_id;
  std::size_t frames = 0;
};

/// Tab-separated utterance list; `split` is inferred from the manifest
/// file name (`<name>_<split>.manifest`).
struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  std::string split;
};

/// Writes feature files under `dir/feats/` and a manifest at
/// `dir/<name>.manifest`; returns the manifest as written.
CorpusManifest write_corpus(const std::string& dir, const std::string& name,
                            const std::vector<Utterance>& utts);

/// Parses and validates a manifest: unique utt_ids, well-formed lines,
/// every referenced feature file present with the declared frame count.
CorpusManifest read_manifest(const std::string& path);

/// Loads the features behind one manifest entry.
Utterance load_utterance(const std::string& manifest_dir,
                         const ManifestEntry& entry);

}  // namespace must

#endif  // MUST_SYNTH_HPP
