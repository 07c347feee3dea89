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

#include "must/harness.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "must/asr.hpp"
#include "must/distill.hpp"
#include "must/ensemble.hpp"
#include "must/errors.hpp"
#include "must/hash.hpp"
#include "must/mesd.hpp"
#include "must/metrics.hpp"
#include "must/rng.hpp"
#include "must/synth.hpp"
#include "must/text.hpp"

namespace must {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing

void fail_key(const std::string& path, const std::string& why) {
  throw ConfigError("config key " + path + ": " + why);
}

template <typename T>
void opt_get(const json& sec, const std::string& secname, const char* name,
             T& out) {
  if (!sec.contains(name)) return;
  try {
    out = sec.at(name).get<T>();
  } catch (const json::exception& e) {
    fail_key(secname + "." + name, e.what());
  }
}

void opt_count(const json& sec, const std::string& secname, const char* name,
               std::size_t& out, long long lo, long long hi) {
  if (!sec.contains(name)) return;
  const json& v = sec.at(name);
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    fail_key(secname + "." + name, "must be an integer");
  }
  const long long n = v.get<long long>();
  if (n < lo || n > hi) {
    fail_key(secname + "." + name, "must lie in [" + std::to_string(lo) +
                                       ", " + std::to_string(hi) + "]");
  }
  out = static_cast<std::size_t>(n);
}

void opt_seed(const json& sec, const std::string& secname, const char* name,
              std::uint64_t& out) {
  if (!sec.contains(name)) return;
  const json& v = sec.at(name);
  if (v.is_number_unsigned()) {
    out = v.get<std::uint64_t>();
    return;
  }
  if (v.is_number_integer() && v.get<long long>() >= 0) {
    out = static_cast<std::uint64_t>(v.get<long long>());
    return;
  }
  fail_key(secname + "." + name, "must be a non-negative integer");
}

void reject_unknown(const json& sec, const std::string& secname,
                    std::initializer_list<const char*> known) {
  for (const auto& item : sec.items()) {
    bool ok = false;
    for (const char* n : known) {
      if (item.key() == n) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ConfigError("unknown config key " +
                        (secname.empty() ? item.key()
                                         : secname + "." + item.key()));
    }
  }
}

const json& section(const json& root, const char* name) {
  static const json empty = json::object();
  if (!root.contains(name)) return empty;
  if (!root.at(name).is_object()) {
    throw ConfigError("config section '" + std::string(name) +
                      "' must be an object");
  }
  return root.at(name);
}

std::string overlap_key(const std::string& a, const std::string& b) {
  return a < b ? a + "-" + b : b + "-" + a;
}

bool valid_tag(const std::string& tag) {
  if (tag.empty()) return false;
  for (char ch : tag) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') ||
                    ch == '_';
    if (!ok) return false;
  }
  return true;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.languages.size() < 2 || cfg.languages.size() > 5) {
    throw ConfigError("corpus.languages must list 2 to 5 languages");
  }
  std::set<std::string> seen;
  for (const std::string& lang : cfg.languages) {
    if (!valid_tag(lang)) {
      throw ConfigError("language tag '" + lang +
                        "' must match [a-z0-9_]+");
    }
    if (!seen.insert(lang).second) {
      throw ConfigError("duplicate language tag '" + lang + "'");
    }
  }
  if (seen.find(cfg.target) == seen.end()) {
    throw ConfigError("corpus.target '" + cfg.target +
                      "' is not in corpus.languages");
  }
  std::set<std::string> wanted;
  for (std::size_t i = 0; i < cfg.languages.size(); ++i) {
    for (std::size_t j = i + 1; j < cfg.languages.size(); ++j) {
      const std::string key = overlap_key(cfg.languages[i], cfg.languages[j]);
      wanted.insert(key);
      const auto it = cfg.overlaps.find(key);
      if (it == cfg.overlaps.end()) {
        throw ConfigError("corpus.overlaps is missing pair '" + key + "'");
      }
      if (!(it->second >= 0.0 && it->second <= 1.0)) {
        throw ConfigError("corpus.overlaps '" + key +
                          "' must lie in [0,1]");
      }
    }
  }
  for (const auto& [key, value] : cfg.overlaps) {
    if (wanted.find(key) == wanted.end()) {
      throw ConfigError("corpus.overlaps has unknown pair '" + key + "'");
    }
  }
  if (cfg.inventory_size < 2 || cfg.inventory_size > 24) {
    throw ConfigError("corpus.inventory_size must lie in [2, 24]");
  }
  if (cfg.min_duration < 1 || cfg.max_duration < cfg.min_duration) {
    throw ConfigError("corpus duration range is invalid");
  }
  if (cfg.min_phonemes < 1 || cfg.max_phonemes < cfg.min_phonemes) {
    throw ConfigError("corpus phoneme-count range is invalid");
  }
  if (!(cfg.noise_stddev >= 0.0)) {
    throw ConfigError("corpus.noise_stddev must be >= 0");
  }
  if (!(cfg.target_train_fraction > 0.0 && cfg.target_train_fraction <= 1.0)) {
    throw ConfigError("corpus.target_train_fraction must lie in (0, 1]");
  }
  if (cfg.mapping_train_utts > cfg.train_utts) {
    throw ConfigError("corpus.mapping_train_utts exceeds corpus.train_utts");
  }
  for (const auto& [name, value] :
       std::initializer_list<std::pair<const char*, double>>{
           {"training.alpha", cfg.alpha},
           {"training.lambda", cfg.lambda},
           {"training.gamma", cfg.gamma}}) {
    if (!(value >= 0.0 && value <= 1.0)) {
      throw ConfigError(std::string(name) + " must lie in [0,1]");
    }
  }
  if (!(cfg.saw_tau > 0.0)) throw ConfigError("training.saw_tau must be > 0");
  if (!(cfg.asr_lr > 0.0 && cfg.mapping_lr > 0.0 && cfg.student_lr > 0.0)) {
    throw ConfigError("learning rates must be > 0");
  }
  if (!(cfg.clip_norm > 0.0)) throw ConfigError("training.clip_norm must be > 0");
  std::set<std::string> tags;
  for (const std::string& tag : cfg.strategies) {
    parse_strategy(tag);  // rejects unknown tags
    if (!tags.insert(tag).second) {
      throw ConfigError("duplicate strategy '" + tag + "'");
    }
  }
  if (tags.count("ftw") != 0) {
    const std::size_t k = cfg.languages.size() - 1;
    if (cfg.ftw_weights.size() != k) {
      throw ConfigError("training.ftw_weights needs " + std::to_string(k) +
                        " entries (one per source language)");
    }
    double sum = 0.0;
    for (double w : cfg.ftw_weights) {
      if (!(w >= 0.0)) {
        throw ConfigError("training.ftw_weights must be non-negative");
      }
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("training.ftw_weights must sum to 1");
    }
  }
  if (cfg.out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

ExperimentConfig parse_json_config(const json& root) {
  if (!root.is_object()) throw ConfigError("config root must be an object");
  reject_unknown(root, "", {"corpus", "model", "training", "decode",
                            "strategies", "out_dir"});
  ExperimentConfig cfg;

  const json& corpus = section(root, "corpus");
  reject_unknown(corpus, "corpus",
                 {"languages", "target", "overlaps", "inventory_size",
                  "feature_dim", "min_duration", "max_duration",
                  "noise_stddev", "min_phonemes", "max_phonemes", "train_utts",
                  "dev_utts", "eval_utts", "target_train_fraction",
                  "mapping_train_utts"});
  opt_get(corpus, "corpus", "languages", cfg.languages);
  opt_get(corpus, "corpus", "target", cfg.target);
  opt_get(corpus, "corpus", "overlaps", cfg.overlaps);
  opt_count(corpus, "corpus", "inventory_size", cfg.inventory_size, 2, 24);
  opt_count(corpus, "corpus", "feature_dim", cfg.feature_dim, 1, 256);
  opt_count(corpus, "corpus", "min_duration", cfg.min_duration, 1, 64);
  opt_count(corpus, "corpus", "max_duration", cfg.max_duration, 1, 64);
  opt_get(corpus, "corpus", "noise_stddev", cfg.noise_stddev);
  opt_count(corpus, "corpus", "min_phonemes", cfg.min_phonemes, 1, 64);
  opt_count(corpus, "corpus", "max_phonemes", cfg.max_phonemes, 1, 64);
  opt_count(corpus, "corpus", "train_utts", cfg.train_utts, 1, 100000);
  opt_count(corpus, "corpus", "dev_utts", cfg.dev_utts, 1, 100000);
  opt_count(corpus, "corpus", "eval_utts", cfg.eval_utts, 1, 100000);
  opt_get(corpus, "corpus", "target_train_fraction",
          cfg.target_train_fraction);
  opt_count(corpus, "corpus", "mapping_train_utts", cfg.mapping_train_utts, 1,
            100000);

  const json& model = section(root, "model");
  reject_unknown(model, "model", {"hidden", "mapping_hidden"});
  opt_count(model, "model", "hidden", cfg.hidden, 1, 1024);
  opt_count(model, "model", "mapping_hidden", cfg.mapping_hidden, 1, 1024);

  const json& training = section(root, "training");
  reject_unknown(training, "training",
                 {"alpha", "lambda", "gamma", "saw_tau", "ftw_weights",
                  "asr_epochs", "asr_lr", "mapping_epochs", "mapping_lr",
                  "rank_weighting", "student_epochs", "student_lr",
                  "clip_norm", "cache_soft_labels", "seed"});
  opt_get(training, "training", "alpha", cfg.alpha);
  opt_get(training, "training", "lambda", cfg.lambda);
  opt_get(training, "training", "gamma", cfg.gamma);
  opt_get(training, "training", "saw_tau", cfg.saw_tau);
  opt_get(training, "training", "ftw_weights", cfg.ftw_weights);
  opt_count(training, "training", "asr_epochs", cfg.asr_epochs, 1, 10000);
  opt_get(training, "training", "asr_lr", cfg.asr_lr);
  opt_count(training, "training", "mapping_epochs", cfg.mapping_epochs, 1,
            10000);
  opt_get(training, "training", "mapping_lr", cfg.mapping_lr);
  opt_get(training, "training", "rank_weighting", cfg.rank_weighting);
  opt_count(training, "training", "student_epochs", cfg.student_epochs, 1,
            10000);
  opt_get(training, "training", "student_lr", cfg.student_lr);
  opt_get(training, "training", "clip_norm", cfg.clip_norm);
  opt_get(training, "training", "cache_soft_labels", cfg.cache_soft_labels);
  opt_seed(training, "training", "seed", cfg.seed);

  const json& decode = section(root, "decode");
  reject_unknown(decode, "decode", {"beam_size"});
  opt_count(decode, "decode", "beam_size", cfg.beam_size, 1, 64);

  if (root.contains("strategies")) {
    try {
      cfg.strategies = root.at("strategies").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      fail_key("strategies", e.what());
    }
  }
  if (root.contains("out_dir")) {
    try {
      cfg.out_dir = root.at("out_dir").get<std::string>();
    } catch (const json::exception& e) {
      fail_key("out_dir", e.what());
    }
  }
  validate(cfg);
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  json& corpus = j["corpus"];
  corpus["languages"] = cfg.languages;
  corpus["target"] = cfg.target;
  corpus["overlaps"] = cfg.overlaps;
  corpus["inventory_size"] = cfg.inventory_size;
  corpus["feature_dim"] = cfg.feature_dim;
  corpus["min_duration"] = cfg.min_duration;
  corpus["max_duration"] = cfg.max_duration;
  corpus["noise_stddev"] = cfg.noise_stddev;
  corpus["min_phonemes"] = cfg.min_phonemes;
  corpus["max_phonemes"] = cfg.max_phonemes;
  corpus["train_utts"] = cfg.train_utts;
  corpus["dev_utts"] = cfg.dev_utts;
  corpus["eval_utts"] = cfg.eval_utts;
  corpus["target_train_fraction"] = cfg.target_train_fraction;
  corpus["mapping_train_utts"] = cfg.mapping_train_utts;
  json& model = j["model"];
  model["hidden"] = cfg.hidden;
  model["mapping_hidden"] = cfg.mapping_hidden;
  json& training = j["training"];
  training["alpha"] = cfg.alpha;
  training["lambda"] = cfg.lambda;
  training["gamma"] = cfg.gamma;
  training["saw_tau"] = cfg.saw_tau;
  training["ftw_weights"] = cfg.ftw_weights;
  training["asr_epochs"] = cfg.asr_epochs;
  training["asr_lr"] = cfg.asr_lr;
  training["mapping_epochs"] = cfg.mapping_epochs;
  training["mapping_lr"] = cfg.mapping_lr;
  training["rank_weighting"] = cfg.rank_weighting;
  training["student_epochs"] = cfg.student_epochs;
  training["student_lr"] = cfg.student_lr;
  training["clip_norm"] = cfg.clip_norm;
  training["cache_soft_labels"] = cfg.cache_soft_labels;
  training["seed"] = cfg.seed;
  j["decode"]["beam_size"] = cfg.beam_size;
  j["strategies"] = cfg.strategies;
  j["out_dir"] = cfg.out_dir;
  return j;
}

void apply_override(json& root, const std::string& kv) {
  const std::size_t eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + kv + "' is not of the form key=value");
  }
  const std::string path = kv.substr(0, eq);
  const std::string value = kv.substr(eq + 1);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // bare strings need no quotes
  }
  json* cur = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string seg = path.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (seg.empty()) {
      throw ConfigError("override '" + kv + "' has an empty path segment");
    }
    if (dot == std::string::npos) {
      (*cur)[seg] = parsed;
      return;
    }
    if (!cur->contains(seg)) (*cur)[seg] = json::object();
    cur = &(*cur)[seg];
    if (!cur->is_object()) {
      throw ConfigError("override '" + kv + "': '" + seg +
                        "' is not a config section");
    }
    start = dot + 1;
  }
}

// ---------------------------------------------------------------------------
// File helpers

void write_text(const std::string& path, const std::string& content) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << content;
  out.flush();
  if (!out) throw Error("failed while writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string zero_pad(std::size_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*llu", width,
                static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Stage plumbing

struct StageRecord {
  std::string stage;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
};

struct StageCtx {
  const ExperimentConfig& cfg;
  std::map<std::string, std::string> inputs;
  std::vector<std::string> produced;

  void note(const std::string& path) { produced.push_back(path); }
};

std::string record_path(const ExperimentConfig& cfg, const std::string& stage) {
  return cfg.out_dir + "/manifests/" + stage + ".json";
}

void save_record(const ExperimentConfig& cfg, const StageRecord& rec) {
  json j;
  j["stage"] = rec.stage;
  j["config_hash"] = rec.config_hash;
  j["seed"] = rec.seed;
  j["inputs"] = rec.inputs;
  j["outputs"] = rec.outputs;
  write_text(record_path(cfg, rec.stage), j.dump(2) + "\n");
}

std::optional<StageRecord> load_record(const ExperimentConfig& cfg,
                                       const std::string& stage) {
  const std::string path = record_path(cfg, stage);
  if (!fs::exists(path)) return std::nullopt;
  StageRecord rec;
  try {
    const json j = json::parse(read_text(path));
    rec.stage = j.at("stage").get<std::string>();
    rec.config_hash = j.at("config_hash").get<std::string>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    rec.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw Error("malformed stage manifest " + path + ": " + e.what());
  }
  return rec;
}

bool outputs_intact(const StageRecord& rec) {
  for (const auto& [path, digest] : rec.outputs) {
    if (!fs::exists(path)) return false;
    if (sha256_file(path) != digest) return false;
  }
  return true;
}

const std::map<std::string, std::vector<std::string>>& stage_deps() {
  static const std::map<std::string, std::vector<std::string>> deps{
      {"gen-data", {}},
      {"train-asr", {"gen-data"}},
      {"train-mapping", {"gen-data", "train-asr"}},
      {"eval-mapping", {"gen-data", "train-asr", "train-mapping"}},
      {"fuse-teachers",
       {"gen-data", "train-asr", "train-mapping", "eval-mapping"}},
      {"distill", {"gen-data", "train-asr", "train-mapping", "eval-mapping"}},
      {"eval-asr", {"gen-data", "distill"}},
      {"report", {"eval-mapping", "fuse-teachers", "eval-asr"}},
  };
  return deps;
}

// ---------------------------------------------------------------------------
// Shared stage helpers

std::vector<std::string> source_langs(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  for (const std::string& lang : cfg.languages) {
    if (lang != cfg.target) out.push_back(lang);
  }
  return out;
}

std::vector<LanguageSpec> build_family(const ExperimentConfig& cfg) {
  FamilyConfig fam;
  fam.language_ids = cfg.languages;
  const std::size_t n = cfg.languages.size();
  fam.overlap.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double o =
          cfg.overlaps.at(overlap_key(cfg.languages[i], cfg.languages[j]));
      fam.overlap[i][j] = o;
      fam.overlap[j][i] = o;
    }
  }
  fam.inventory_size = cfg.inventory_size;
  fam.feature_dim = cfg.feature_dim;
  fam.min_duration = cfg.min_duration;
  fam.max_duration = cfg.max_duration;
  fam.noise_stddev = cfg.noise_stddev;
  fam.seed = derive_seed(cfg.seed, {"corpus"});
  return generate_family(fam);
}

const LanguageSpec& spec_for(const std::vector<LanguageSpec>& specs,
                             const std::string& lang) {
  for (const LanguageSpec& spec : specs) {
    if (spec.language_id == lang) return spec;
  }
  throw Error("no language spec for '" + lang + "'");
}

Vocab vocab_for(const LanguageSpec& spec) {
  Vocab v;
  v.characters = spec.character_set;
  return v;
}

std::string data_dir(const ExperimentConfig& cfg, const std::string& lang) {
  return cfg.out_dir + "/data/" + lang;
}

std::string model_path(const ExperimentConfig& cfg, const std::string& name) {
  return cfg.out_dir + "/models/" + name + ".ckpt";
}

std::vector<Utterance> load_split(const ExperimentConfig& cfg,
                                  const std::string& lang,
                                  const std::string& name) {
  const std::string dir = data_dir(cfg, lang);
  const CorpusManifest man = read_manifest(dir + "/" + name + ".manifest");
  std::vector<Utterance> out;
  out.reserve(man.entries.size());
  for (const ManifestEntry& entry : man.entries) {
    out.push_back(load_utterance(dir, entry));
  }
  return out;
}

std::size_t low_train_count(const ExperimentConfig& cfg) {
  const auto n = static_cast<std::size_t>(
      std::llround(cfg.target_train_fraction *
                   static_cast<double>(cfg.train_utts)));
  return std::max<std::size_t>(1, std::min(n, cfg.train_utts));
}

std::string join_g17(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i != 0) out += ';';
    out += fmt_g17(values[i]);
  }
  return out;
}

std::string batch_log_csv(const std::vector<BatchLogRow>& rows) {
  std::string s = "epoch,batch,utt_id,l_ctc,l_ce,l_kd,weights,total\n";
  for (const BatchLogRow& r : rows) {
    s += std::to_string(r.epoch) + ',' + std::to_string(r.batch) + ',' +
         r.utt_id + ',' + fmt_g17(r.l_ctc) + ',' + fmt_g17(r.l_ce) + ',' +
         fmt_g17(r.l_kd) + ',' + join_g17(r.teacher_weights) + ',' +
         fmt_g17(r.total) + '\n';
  }
  return s;
}

std::string mesd_log_csv(const std::vector<MesdLogRow>& rows) {
  std::string s = "epoch,batch,utt_id,pair_losses,weights,combined\n";
  for (const MesdLogRow& r : rows) {
    s += std::to_string(r.epoch) + ',' + std::to_string(r.batch) + ',' +
         r.utt_id + ',' + join_g17(r.pair_losses) + ',' +
         join_g17(r.weights) + ',' + fmt_g17(r.combined) + '\n';
  }
  return s;
}

AsrModel load_asr(const ExperimentConfig& cfg, const std::string& name) {
  return load_asr_model(model_path(cfg, name));
}

std::map<std::string, double> read_accuracies(const std::string& path) {
  try {
    return json::parse(read_text(path)).get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    throw Error("malformed accuracy table " + path + ": " + e.what());
  }
}

std::vector<double> one_hot_weights(std::size_t k, std::size_t index) {
  std::vector<double> w(k, 0.0);
  w[index] = 1.0;
  return w;
}

// ---------------------------------------------------------------------------
// Stage bodies

void stage_gen_data(StageCtx& c) {
  const ExperimentConfig& cfg = c.cfg;
  const std::vector<LanguageSpec> specs = build_family(cfg);
  const std::array<std::pair<const char*, std::size_t>, 3> splits{{
      {"train", cfg.train_utts},
      {"dev", cfg.dev_utts},
      {"eval", cfg.eval_utts},
  }};
  for (const std::string& lang : cfg.languages) {
    const LanguageSpec& spec = spec_for(specs, lang);
    const std::string dir = data_dir(cfg, lang);
    for (const auto& [split, count] : splits) {
      std::vector<Utterance> utts;
      utts.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::string tag = std::to_string(i);
        Rng len_rng(derive_seed(cfg.seed, {"len", lang, split, tag}));
        const std::size_t span = cfg.max_phonemes - cfg.min_phonemes + 1;
        const std::size_t num_phonemes =
            cfg.min_phonemes + len_rng.uniform_index(span);
        const std::uint64_t utt_seed =
            derive_seed(cfg.seed, {"utt", lang, split, tag});
        utts.push_back(synthesize_utterance(
            spec, num_phonemes, utt_seed,
            lang + "_" + split + "_" + zero_pad(i, 4)));
      }
      const std::string name = lang + "_" + split;
      write_corpus(dir, name, utts);
      c.note(dir + "/" + name + ".manifest");
      for (const Utterance& u : utts) {
        c.note(dir + "/feats/" + u.utt_id + ".feat");
      }
      if (lang == cfg.target && std::string(split) == "train") {
        // Students see only a low-resource slice of the target transcripts;
        // the mapping model hears more audio but never reads transcripts.
        const std::vector<Utterance> low(
            utts.begin(), utts.begin() + low_train_count(cfg));
        write_corpus(dir, lang + "_low_train", low);
        c.note(dir + "/" + lang + "_low_train.manifest");
        const std::vector<Utterance> map_sub(
            utts.begin(), utts.begin() + cfg.mapping_train_utts);
        write_corpus(dir, lang + "_map_train", map_sub);
        c.note(dir + "/" + lang + "_map_train.manifest");
      }
    }
  }
}

void stage_train_asr(StageCtx& c) {
  const ExperimentConfig& cfg = c.cfg;
  const std::vector<LanguageSpec> specs = build_family(cfg);
  for (const std::string& lang : cfg.languages) {
    const std::vector<Utterance> corpus =
        load_split(cfg, lang, lang + "_train");
    TrainHyper h;
    h.alpha = cfg.alpha;
    h.lambda = 0.0;
    h.epochs = cfg.asr_epochs;
    h.lr = cfg.asr_lr;
    h.hidden = cfg.hidden;
    h.clip_norm = cfg.clip_norm;
    h.seed = derive_seed(cfg.seed, {"asr", lang});
    h.vocab = vocab_for(spec_for(specs, lang));
    std::vector<BatchLogRow> log;
    const AsrModel model = train_asr(corpus, h, &log);
    const std::string mp = model_path(cfg, "asr_" + lang);
    save_asr_model(model, mp);
    c.note(mp);
    c.note(mp + ".json");
    const std::string lp = cfg.out_dir + "/logs/train_asr_" + lang + ".csv";
    write_text(lp, batch_log_csv(log));
    c.note(lp);
  }
}

void stage_train_mapping(StageCtx& c) {
  const ExperimentConfig& cfg = c.cfg;
  const AsrModel target_asr = load_asr(cfg, "asr_" + cfg.target);
  std::vector<AsrModel> sources;
  for (const std::string& lang : source_langs(cfg)) {
    sources.push_back(load_asr(cfg, "asr_" + lang));
  }
  const std::vector<Utterance> corpus =
      load_split(cfg, cfg.target, cfg.target + "_map_train");
  MesdHyper h;
  h.epochs = cfg.mapping_epochs;
  h.lr = cfg.mapping_lr;
  h.hidden = cfg.mapping_hidden;
  h.rank_weighting = cfg.rank_weighting;
  h.clip_norm = cfg.clip_norm;
  h.seed = derive_seed(cfg.seed, {"mapping"});
  std::vector<MesdLogRow> log;
  const MesdModel model = train_mesd(target_asr, sources, corpus, h, &log);
  const std::string mp = model_path(cfg, "mapping");
  save_mesd_model(model, mp);
  c.note(mp);
  c.note(mp + ".json");
  const std::string lp = cfg.out_dir + "/logs/train_mapping.csv";
  write_text(lp, mesd_log_csv(log));
  c.note(lp);
}

void stage_eval_mapping(StageCtx& c) {
  const ExperimentConfig& cfg = c.cfg;
  const AsrModel target_asr = load_asr(cfg, "asr_" + cfg.target);
  const MesdModel mapping = load_mesd_model(model_path(cfg, "mapping"));
  const std::vector<Utterance> dev =
      load_split(cfg, cfg.target, cfg.target + "_dev");
  std::map<std::pair<std::string, std::string>, double> cells;
  json ratios;
  for (const std::string& lang : source_langs(cfg)) {
    const AsrModel source = load_asr(cfg, "asr_" + lang);
    const MappingAccuracy acc =
        mapping_accuracy(mapping, lang, target_asr, source, dev);
    cells[{lang, cfg.target}] = 100.0 * acc.ratio;
    ratios[lang] = acc.ratio;
  }
  const std::string csv_path = cfg.out_dir + "/reports/mapping_accuracy.csv";
  write_text(csv_path, csv_table("source", source_langs(cfg), {cfg.target},
                                 cells, 2, /*with_avg=*/true));
  c.note(csv_path);
  const std::string json_path = cfg.out_dir + "/reports/mapping_accuracy.json";
  write_text(json_path, ratios.dump(2) + "\n");
  c.note(json_path);
}

void stage_fuse_teachers(StageCtx& c) {
  const ExperimentConfig& cfg = c.cfg;
  const AsrModel target_asr = load_asr(cfg, "asr_" + cfg.target);
  const MesdModel mapping = load_mesd_model(model_path(cfg, "mapping"));
  const std::vector<std::string> langs = source_langs(cfg);
  std::vector<AsrModel> sources;
  for (const std::string& lang : langs) {
    sources.push_back(load_asr(cfg, "asr_" + lang));
  }
  const std::vector<Utterance> eval_set =
      load_split(cfg, cfg.target, cfg.target + "_eval");
  const std::string selected = select_st(
      read_accuracies(cfg.out_dir + "/reports/mapping_accuracy.json"));

  std::vector<TeacherOutputs> per_utt(eval_set.size());
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    for (std::size_t k = 0; k < sources.size(); ++k) {
      per_utt[i].teacher_ids.push_back(langs[k]);
      per_utt[i].posteriors.push_back(map_posteriors(
          mapping, langs[k], frame_posteriors(sources[k], eval_set[i])));
    }
  }
  std::size_t st_index = 0;
  while (st_index < langs.size() && langs[st_index] != selected) ++st_index;

  std::vector<std::string> utt_ids;
  std::vector<std::u32string> refs;
  for (const Utterance& u : eval_set) {
    utt_ids.push_back(u.utt_id);
    refs.push_back(u.transcript);
  }

  std::map<std::pair<std::string, std::string>, double> cells;
  json percents;
  for (const std::string& tag : cfg.strategies) {
    const StrategyKind kind = parse_strategy(tag);
    std::vector<std::u32string> hyps;
    hyps.reserve(eval_set.size());
    for (std::size_t i = 0; i < eval_set.size(); ++i) {
      const TeacherOutputs& outputs = per_utt[i];
      PosteriorSequence fused;
      switch (kind) {
        case StrategyKind::kTa:
          fused = fuse(outputs, weights_ta(outputs.size()));
          break;
        case StrategyKind::kSaw:
          fused = fuse(outputs, weights_saw(outputs, cfg.saw_tau));
          break;
        case StrategyKind::kFtw:
          fused = fuse(outputs, cfg.ftw_weights);
          break;
        case StrategyKind::kEs:
          fused = fuse(outputs,
                       one_hot_weights(outputs.size(), select_es(outputs)));
          break;
        case StrategyKind::kSt:
          fused = fuse(outputs, one_hot_weights(outputs.size(), st_index));
          break;
        case StrategyKind::kFwm:
          fused = select_fwm(outputs);
          break;
      }
      validate_posteriors(fused);
      hyps.push_back(greedy_ctc_decode(fused, target_asr.vocab));
    }
    const CerResult r = cer(hyps, refs);
    cells[{tag, cfg.target}] = 100.0 * r.cer;
    percents[tag] = 100.0 * r.cer;
    const std::string jl = cfg.out_dir + "/logs/fusion_" + tag + ".jsonl";
    write_text(jl, jsonl_utterance_log(utt_ids, hyps, refs));
    c.note(jl);
  }
  const std::string csv_path = cfg.out_dir + "/reports/fusion_cer.csv";
  write_text(csv_path, csv_table("strategy", cfg.strategies, {cfg.target},
                                 cells, 2, /*with_avg=*/true));
  c.note(csv_path);
  const std::string json_path = cfg.out_dir + "/reports/fusion_cer.json";
  write_text(json_path, percents.dump(2) + "\n");
  c.note(json_path);
}

void stage_distill(StageCtx& c) {
  const ExperimentConfig& cfg = c.cfg;
  const std::vector<LanguageSpec> specs = build_family(cfg);
  const std::vector<Utterance> low =
      load_split(cfg, cfg.target, cfg.target + "_low_train");
  const MesdModel mapping = load_mesd_model(model_path(cfg, "mapping"));
  std::vector<TeacherPipeline> pipelines;
  for (const std::string& lang : source_langs(cfg)) {
    TeacherPipeline p;
    p.source_asr = load_asr(cfg, "asr_" + lang);
    p.mapping = mapping;
    p.source_language = lang;
    p.target_language = cfg.target;
    pipelines.push_back(std::move(p));
  }
  const std::string selected = select_st(
      read_accuracies(cfg.out_dir + "/reports/mapping_accuracy.json"));

  TrainHyper h;
  h.alpha = cfg.alpha;
  h.lambda = cfg.lambda;
  h.epochs = cfg.student_epochs;
  h.lr = cfg.student_lr;
  h.hidden = cfg.hidden;
  h.clip_norm = cfg.clip_norm;
  // One shared seed: every student starts from the same weights and sees
  // the same batch order, so runs differ only in the distillation term.
  h.seed = derive_seed(cfg.seed, {"student", cfg.target});
  h.vocab = vocab_for(spec_for(specs, cfg.target));

  auto emit = [&](const std::string& name, const AsrModel& model,
                  const std::vector<BatchLogRow>& log) {
    const std::string mp = model_path(cfg, "student_" + name);
    save_asr_model(model, mp);
    c.note(mp);
    c.note(mp + ".json");
    const std::string lp =
        cfg.out_dir + "/logs/train_student_" + name + ".csv";
    write_text(lp, batch_log_csv(log));
    c.note(lp);
  };

  {
    std::vector<BatchLogRow> log;
    const AsrModel mono = train_asr(low, h, &log);
    emit("mono", mono, log);
  }
  for (const std::string& tag : cfg.strategies) {
    DistillConfig dc;
    dc.hyper = h;
    dc.strategy.kind = parse_strategy(tag);
    dc.strategy.tau = cfg.saw_tau;
    dc.strategy.fixed_weights = cfg.ftw_weights;
    dc.strategy.selected_teacher = selected;
    dc.cache_soft_labels = cfg.cache_soft_labels;
    std::vector<BatchLogRow> log;
    std::map<std::string, std::size_t> invocations;
    const AsrModel student =
        train_student(low, pipelines, dc, &log, &invocations);
    emit(tag, student, log);
    const std::string ip =
        cfg.out_dir + "/logs/teacher_invocations_" + tag + ".json";
    write_text(ip, json(invocations).dump(2) + "\n");
    c.note(ip);
  }
}

void stage_eval_asr(StageCtx& c) {
  const ExperimentConfig& cfg = c.cfg;
  const std::vector<Utterance> eval_set =
      load_split(cfg, cfg.target, cfg.target + "_eval");
  std::vector<std::string> utt_ids;
  std::vector<std::u32string> refs;
  for (const Utterance& u : eval_set) {
    utt_ids.push_back(u.utt_id);
    refs.push_back(u.transcript);
  }
  std::vector<std::string> names{"mono"};
  names.insert(names.end(), cfg.strategies.begin(), cfg.strategies.end());
  std::map<std::pair<std::string, std::string>, double> cells;
  json percents;
  for (const std::string& name : names) {
    const AsrModel model = load_asr(cfg, "student_" + name);
    std::vector<std::u32string> hyps;
    hyps.reserve(eval_set.size());
    for (const Utterance& u : eval_set) {
      hyps.push_back(decode(model, u, cfg.gamma, cfg.beam_size));
    }
    const CerResult r = cer(hyps, refs);
    cells[{name, cfg.target}] = 100.0 * r.cer;
    percents[name] = 100.0 * r.cer;
    const std::string jl =
        cfg.out_dir + "/logs/eval_student_" + name + ".jsonl";
    write_text(jl, jsonl_utterance_log(utt_ids, hyps, refs));
    c.note(jl);
  }
  const std::string csv_path = cfg.out_dir + "/reports/student_cer.csv";
  write_text(csv_path, csv_table("student", names, {cfg.target}, cells, 2,
                                 /*with_avg=*/true));
  c.note(csv_path);
  const std::string json_path = cfg.out_dir + "/reports/student_cer.json";
  write_text(json_path, percents.dump(2) + "\n");
  c.note(json_path);
}

void stage_report(StageCtx& c) {
  const ExperimentConfig& cfg = c.cfg;
  const std::string reports = cfg.out_dir + "/reports/";
  std::string langs;
  for (std::size_t i = 0; i < cfg.languages.size(); ++i) {
    if (i != 0) langs += ", ";
    langs += cfg.languages[i];
  }
  std::string s;
  s += "# Experiment summary\n\n";
  s += "- config hash: " + config_hash(cfg) + "\n";
  s += "- master seed: " + std::to_string(cfg.seed) + "\n";
  s += "- languages: " + langs + " (target: " + cfg.target + ")\n";
  s += "- utterances per language (train/dev/eval): " +
       std::to_string(cfg.train_utts) + "/" + std::to_string(cfg.dev_utts) +
       "/" + std::to_string(cfg.eval_utts) + "\n";
  s += "- target low-resource train fraction: " +
       fmt_f(cfg.target_train_fraction, 2) + " (" +
       std::to_string(low_train_count(cfg)) + " utterances)\n\n";
  s += "## Mapping accuracy (%)\n\n```\n" +
       read_text(reports + "mapping_accuracy.csv") + "```\n\n";
  s += "## Fused-teacher CER (%), greedy decode\n\n```\n" +
       read_text(reports + "fusion_cer.csv") + "```\n\n";
  s += "## Student CER (%), joint decode\n\n```\n" +
       read_text(reports + "student_cer.csv") + "```\n";
  const std::string path = reports + "summary.md";
  write_text(path, s);
  c.note(path);
}

void run_body(const std::string& stage, StageCtx& ctx) {
  if (stage == "gen-data") {
    stage_gen_data(ctx);
  } else if (stage == "train-asr") {
    stage_train_asr(ctx);
  } else if (stage == "train-mapping") {
    stage_train_mapping(ctx);
  } else if (stage == "eval-mapping") {
    stage_eval_mapping(ctx);
  } else if (stage == "fuse-teachers") {
    stage_fuse_teachers(ctx);
  } else if (stage == "distill") {
    stage_distill(ctx);
  } else if (stage == "eval-asr") {
    stage_eval_asr(ctx);
  } else if (stage == "report") {
    stage_report(ctx);
  } else {
    throw ConfigError("unknown stage '" + stage + "'");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Public surface

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_json_config(j);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  return config_to_json(cfg).dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Where artifacts land is not part of what the experiment is; the same
  // config run into two directories must produce interchangeable artifacts.
  ExperimentConfig keyed = cfg;
  keyed.out_dir = "out";
  return sha256_hex(serialize_config(keyed));
}

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " +
                      e.what());
  }
  for (const std::string& kv : overrides) apply_override(j, kv);
  if (const char* env = std::getenv("MUST_OUT"); env != nullptr && *env) {
    j["out_dir"] = std::string(env);
  }
  return parse_json_config(j);
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{
      "gen-data",      "train-asr", "train-mapping", "eval-mapping",
      "fuse-teachers", "distill",   "eval-asr",      "report",
  };
  return names;
}

void run_stage(const ExperimentConfig& cfg, const std::string& stage,
               bool force) {
  const auto dep_it = stage_deps().find(stage);
  if (dep_it == stage_deps().end()) {
    throw ConfigError("unknown stage '" + stage + "'");
  }
  const std::string hash = config_hash(cfg);
  StageCtx ctx{cfg, {}, {}};
  for (const std::string& dep : dep_it->second) {
    const std::optional<StageRecord> rec = load_record(cfg, dep);
    if (!rec) {
      throw DependencyError("stage '" + stage + "' needs artifacts from '" +
                            dep + "'; run that stage first");
    }
    for (const auto& [path, digest] : rec->outputs) {
      if (!fs::exists(path)) {
        throw DependencyError("artifact '" + path + "' recorded by stage '" +
                              dep + "' is missing");
      }
      if (sha256_file(path) != digest) {
        throw DependencyError("artifact '" + path +
                              "' does not match the hash recorded by stage '" +
                              dep + "'");
      }
      ctx.inputs[path] = digest;
    }
  }
  if (const std::optional<StageRecord> prev = load_record(cfg, stage)) {
    if (prev->config_hash != hash && !force) {
      throw ConfigError("'" + cfg.out_dir +
                        "' holds artifacts for a different config (recorded " +
                        prev->config_hash.substr(0, 12) + "..., current " +
                        hash.substr(0, 12) +
                        "...); pass --force to overwrite");
    }
    if (prev->config_hash == hash && prev->inputs == ctx.inputs &&
        outputs_intact(*prev)) {
      std::cout << "[" << stage << "] up to date, " << prev->outputs.size()
                << " artifacts verified\n";
      return;
    }
  }
  run_body(stage, ctx);
  StageRecord rec;
  rec.stage = stage;
  rec.config_hash = hash;
  rec.seed = cfg.seed;
  rec.inputs = std::move(ctx.inputs);
  for (const std::string& path : ctx.produced) {
    rec.outputs[path] = sha256_file(path);
  }
  save_record(cfg, rec);
  std::cout << "[" << stage << "] wrote " << rec.outputs.size()
            << " artifacts\n";
}

void run_all(const ExperimentConfig& cfg, bool force) {
  for (const std::string& stage : stage_names()) run_stage(cfg, stage, force);
}

}  // namespace must
