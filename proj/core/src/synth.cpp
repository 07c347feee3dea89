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

#include "must/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "must/binio.hpp"
#include "must/errors.hpp"
#include "must/rng.hpp"
#include "must/text.hpp"

namespace must {

namespace {

// One disjoint script range per supported language slot; every range holds
// at least 25 contiguous letters.
struct ScriptRange {
  const char* name;
  char32_t base;
  std::size_t capacity;
};
constexpr ScriptRange kScripts[] = {
    {"latin", U'a', 26},
    {"greek", 0x3B1, 25},
    {"cyrillic", 0x430, 32},
    {"hebrew", 0x5D0, 27},
    {"devanagari", 0x905, 40},
};
constexpr std::size_t kMaxLanguages = sizeof(kScripts) / sizeof(kScripts[0]);

constexpr char kFeatMagic[9] = "MUSTFEAT";
constexpr std::uint32_t kFeatVersion = 1;

}  // namespace

std::vector<LanguageSpec> generate_family(const FamilyConfig& cfg) {
  const std::size_t k = cfg.language_ids.size();
  if (k == 0 || k > kMaxLanguages) {
    throw ConfigError("family must have 1 to " + std::to_string(kMaxLanguages) +
                      " languages, got " + std::to_string(k));
  }
  {
    std::set<std::string> uniq(cfg.language_ids.begin(), cfg.language_ids.end());
    if (uniq.size() != k) throw ConfigError("duplicate language ids in family");
  }
  const std::size_t n = cfg.inventory_size;
  if (n < 2 || n > 24) {
    throw ConfigError("inventory size must be in [2, 24], got " +
                      std::to_string(n));
  }
  if (cfg.feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (cfg.min_duration < 1 || cfg.max_duration < cfg.min_duration) {
    throw ConfigError("duration range invalid: [" +
                      std::to_string(cfg.min_duration) + ", " +
                      std::to_string(cfg.max_duration) + "]");
  }
  if (cfg.noise_stddev < 0.0) throw ConfigError("noise_stddev must be >= 0");
  if (cfg.overlap.size() != k) {
    throw ConfigError("overlap matrix must be " + std::to_string(k) + "x" +
                      std::to_string(k));
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (cfg.overlap[i].size() != k) {
      throw ConfigError("overlap matrix row " + std::to_string(i) +
                        " has wrong length");
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double o = cfg.overlap[i][j];
      if (!(o >= 0.0 && o <= 1.0)) {
        throw ConfigError("overlap entries must lie in [0,1]");
      }
      if (std::abs(o - cfg.overlap[j][i]) > 1e-12) {
        throw ConfigError("overlap matrix must be symmetric");
      }
    }
    if (std::abs(cfg.overlap[i][i] - 1.0) > 1e-12) {
      throw ConfigError("overlap diagonal must be 1");
    }
  }

  // Pairwise shared counts m[i][j] = round(o * n). The pool is organized as
  // one bucket shared by the whole family (size t) plus one bucket per pair
  // shared by exactly that pair (size m - t) plus private remainders, which
  // realizes every pairwise count exactly when such an assignment exists.
  std::vector<std::vector<std::size_t>> m(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i != j) {
        m[i][j] = static_cast<std::size_t>(
            std::llround(cfg.overlap[i][j] * static_cast<double>(n)));
      }
    }
  }
  std::size_t t = 0;
  if (k >= 3) {
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t demand = 0;
      for (std::size_t j = 0; j < k; ++j) demand += m[i][j];
      if (demand > n) {
        const std::size_t deficit = demand - n;
        const std::size_t needed = (deficit + k - 3) / (k - 2);  // ceil
        t = std::max(t, needed);
      }
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (m[i][j] < t) {
        throw ConfigError(
            "overlap matrix infeasible: pair (" + cfg.language_ids[i] + ", " +
            cfg.language_ids[j] + ") shares " + std::to_string(m[i][j]) +
            " prototypes but the remaining pairs require at least " +
            std::to_string(t) + " family-wide ones");
      }
    }
  }

  // Assign global prototype ids bucket by bucket.
  std::vector<std::set<int>> ids(k);
  int next_id = 0;
  for (std::size_t b = 0; b < t; ++b) {
    for (std::size_t i = 0; i < k; ++i) ids[i].insert(next_id);
    ++next_id;
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      for (std::size_t b = t; b < m[i][j]; ++b) {
        ids[i].insert(next_id);
        ids[j].insert(next_id);
        ++next_id;
      }
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (ids[i].size() > n) {
      // Unreachable when t satisfies every language's demand; kept as a
      // guard against future bucket-scheme edits.
      throw ConfigError("overlap matrix infeasible for language " +
                        cfg.language_ids[i]);
    }
    while (ids[i].size() < n) ids[i].insert(next_id++);
  }

  // Draw prototype vectors for every global id in ascending order.
  Rng rng(cfg.seed);
  std::map<int, Tensor> pool;
  for (int id = 0; id < next_id; ++id) {
    Tensor proto = Tensor::zeros({1, cfg.feature_dim});
    for (std::size_t f = 0; f < cfg.feature_dim; ++f) {
      proto.at(0, f) = rng.gauss();
    }
    pool.emplace(id, std::move(proto));
  }

  std::vector<LanguageSpec> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    LanguageSpec& spec = out[i];
    spec.language_id = cfg.language_ids[i];
    spec.feature_dim = cfg.feature_dim;
    spec.noise_stddev = cfg.noise_stddev;
    spec.phoneme_inventory.assign(ids[i].begin(), ids[i].end());
    const ScriptRange& script = kScripts[i];
    for (std::size_t s = 0; s < spec.phoneme_inventory.size(); ++s) {
      const int phon = spec.phoneme_inventory[s];
      const char32_t ch = script.base + static_cast<char32_t>(s);
      spec.grapheme_map[phon] = ch;
      spec.character_set.push_back(ch);
      spec.prototype_bank[phon] = pool.at(phon);
      spec.duration_range[phon] = {cfg.min_duration, cfg.max_duration};
    }
  }
  return out;
}

std::size_t shared_prototypes(const LanguageSpec& a, const LanguageSpec& b) {
  std::size_t shared = 0;
  for (int id : a.phoneme_inventory) {
    if (std::find(b.phoneme_inventory.begin(), b.phoneme_inventory.end(), id) !=
        b.phoneme_inventory.end()) {
      ++shared;
    }
  }
  return shared;
}

Utterance synthesize_utterance(const LanguageSpec& spec,
                               std::size_t num_phonemes, std::uint64_t seed,
                               const std::string& utt_id) {
  if (num_phonemes < 1) throw ConfigError("num_phonemes must be >= 1");
  Rng rng(seed);
  Utterance utt;
  utt.language_id = spec.language_id;
  utt.utt_id = utt_id.empty()
                   ? spec.language_id + "-u" + std::to_string(seed)
                   : utt_id;
  std::vector<double> rows;
  std::size_t frames = 0;
  for (std::size_t p = 0; p < num_phonemes; ++p) {
    const int phon =
        spec.phoneme_inventory[rng.uniform_index(spec.phoneme_inventory.size())];
    utt.transcript.push_back(spec.grapheme_map.at(phon));
    const auto [lo, hi] = spec.duration_range.at(phon);
    const std::size_t dur = lo + rng.uniform_index(hi - lo + 1);
    const Tensor& proto = spec.prototype_bank.at(phon);
    for (std::size_t d = 0; d < dur; ++d) {
      for (std::size_t f = 0; f < spec.feature_dim; ++f) {
        rows.push_back(proto.at(0, f) + spec.noise_stddev * rng.gauss());
      }
      ++frames;
    }
  }
  utt.features = Tensor({frames, spec.feature_dim}, std::move(rows));
  return utt;
}

void write_features(const std::string& path, const Tensor& features) {
  if (features.rank() != 2) {
    throw NumericalError("feature matrix must be rank 2, got " +
                         features.shape_str());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open feature file for writing: " + path);
  binio::write_magic(out, kFeatMagic);
  binio::write_u32(out, kFeatVersion);
  binio::write_u64(out, features.rows());
  binio::write_u64(out, features.cols());
  for (double v : features.data) binio::write_f64(out, v);
  if (!out) throw Error("short write to feature file: " + path);
}

namespace {
std::pair<std::size_t, std::size_t> read_feature_header(std::istream& in,
                                                        const std::string& path) {
  binio::expect_magic(in, kFeatMagic, "feature");
  const std::uint32_t version = binio::read_u32(in);
  if (version != kFeatVersion) {
    throw Error("unsupported feature file version " + std::to_string(version) +
                " in " + path);
  }
  const auto t = static_cast<std::size_t>(binio::read_u64(in));
  const auto f = static_cast<std::size_t>(binio::read_u64(in));
  return {t, f};
}
}  // namespace

Tensor read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file: " + path);
  const auto [t, f] = read_feature_header(in, path);
  std::vector<double> data(t * f);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = binio::read_f64(in);
  return Tensor({t, f}, std::move(data));
}

std::pair<std::size_t, std::size_t> read_feature_dims(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file: " + path);
  return read_feature_header(in, path);
}

namespace {
std::string infer_split(const std::string& manifest_path) {
  std::string stem = std::filesystem::path(manifest_path).stem().string();
  const std::size_t us = stem.find_last_of('_');
  const std::string tail = us == std::string::npos ? stem : stem.substr(us + 1);
  if (tail == "train" || tail == "dev" || tail == "eval") return tail;
  return "unknown";
}
}  // namespace

CorpusManifest write_corpus(const std::string& dir, const std::string& name,
                            const std::vector<Utterance>& utts) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "feats");
  CorpusManifest manifest;
  const std::string manifest_path = (fs::path(dir) / (name + ".manifest")).string();
  manifest.split = infer_split(manifest_path);
  std::set<std::string> seen;
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw Error("cannot open manifest for writing: " + manifest_path);
  for (const Utterance& u : utts) {
    if (u.utt_id.empty() || u.utt_id.find_first_of("\t\n") != std::string::npos) {
      throw Error("invalid utt_id '" + u.utt_id + "'");
    }
    if (!seen.insert(u.utt_id).second) {
      throw Error("duplicate utt_id '" + u.utt_id + "'");
    }
    const std::string transcript = utf8_encode(u.transcript);
    if (transcript.find_first_of("\t\n") != std::string::npos) {
      throw Error("transcript of '" + u.utt_id + "' contains tab or newline");
    }
    ManifestEntry e;
    e.utt_id = u.utt_id;
    e.path = "feats/" + u.utt_id + ".feat";
    e.transcript = u.transcript;
    e.language_id = u.language_id;
    e.frames = u.features.rows();
    write_features((fs::path(dir) / e.path).string(), u.features);
    out << e.utt_id << '\t' << e.path << '\t' << transcript << '\t'
        << e.language_id << '\t' << e.frames << '\n';
    manifest.entries.push_back(std::move(e));
  }
  if (!out) throw Error("short write to manifest: " + manifest_path);
  return manifest;
}

CorpusManifest read_manifest(const std::string& path) {
  namespace fs = std::filesystem;
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest: " + path);
  const fs::path dir = fs::path(path).parent_path();
  CorpusManifest manifest;
  manifest.split = infer_split(path);
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 5) {
      throw Error("malformed manifest line " + std::to_string(line_no) +
                  " in " + path + ": expected 5 tab-separated fields, got " +
                  std::to_string(fields.size()));
    }
    ManifestEntry e;
    e.utt_id = fields[0];
    e.path = fields[1];
    e.transcript = utf8_decode(fields[2]);
    e.language_id = fields[3];
    try {
      std::size_t used = 0;
      e.frames = std::stoull(fields[4], &used);
      if (used != fields[4].size()) throw std::invalid_argument(fields[4]);
    } catch (const std::exception&) {
      throw Error("malformed manifest line " + std::to_string(line_no) +
                  " in " + path + ": bad frame count '" + fields[4] + "'");
    }
    if (!seen.insert(e.utt_id).second) {
      throw Error("duplicate utt_id '" + e.utt_id + "' at manifest line " +
                  std::to_string(line_no) + " in " + path);
    }
    const fs::path feat = dir / e.path;
    if (!fs::exists(feat)) {
      throw Error("manifest entry '" + e.utt_id +
                  "' references a missing feature file: " + feat.string());
    }
    const auto [t, f] = read_feature_dims(feat.string());
    (void)f;
    if (t != e.frames) {
      throw Error("manifest entry '" + e.utt_id + "' declares " +
                  std::to_string(e.frames) + " frames but the file has " +
                  std::to_string(t));
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

Utterance load_utterance(const std::string& manifest_dir,
                         const ManifestEntry& entry) {
  namespace fs = std::filesystem;
  Utterance utt;
  utt.utt_id = entry.utt_id;
  utt.language_id = entry.language_id;
  utt.transcript = entry.transcript;
  utt.features = read_features((fs::path(manifest_dir) / entry.path).string());
  return utt;
}

}  // namespace must
