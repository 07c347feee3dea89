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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "must/errors.hpp"
#include "must/harness.hpp"

using namespace must;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ExperimentConfig tiny_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.languages = {"lat", "gre"};
  cfg.target = "gre";
  cfg.overlaps = {{"gre-lat", 0.75}};
  cfg.inventory_size = 6;
  cfg.min_phonemes = 2;
  cfg.max_phonemes = 4;
  cfg.train_utts = 6;
  cfg.dev_utts = 2;
  cfg.eval_utts = 2;
  cfg.mapping_train_utts = 4;
  cfg.hidden = 6;
  cfg.mapping_hidden = 6;
  cfg.asr_epochs = 1;
  cfg.mapping_epochs = 1;
  cfg.student_epochs = 1;
  cfg.ftw_weights = {1.0};
  cfg.seed = 5;
  cfg.out_dir = out_dir;
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), "cannot open " << path.string());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

std::map<std::string, std::string> report_bytes(const fs::path& out_dir) {
  std::map<std::string, std::string> bytes;
  for (const auto& entry : fs::directory_iterator(out_dir / "reports")) {
    bytes[entry.path().filename().string()] = slurp(entry.path());
  }
  return bytes;
}

/// Re-parses the canonical default serialization with one dotted path
/// replaced, so each validation rule can be poked in isolation.
ExperimentConfig with_field(const std::string& dotted, const json& value) {
  json j = json::parse(serialize_config(ExperimentConfig{}));
  json* cursor = &j;
  std::string rest = dotted;
  for (std::size_t dot = rest.find('.'); dot != std::string::npos;
       dot = rest.find('.')) {
    cursor = &(*cursor)[rest.substr(0, dot)];
    rest = rest.substr(dot + 1);
  }
  (*cursor)[rest] = value;
  return parse_config(j.dump());
}

}  // namespace

TEST_CASE("configs round trip through the canonical serialization") {
  const ExperimentConfig defaults;
  const std::string text = serialize_config(defaults);
  const ExperimentConfig reparsed = parse_config(text);
  CHECK(serialize_config(reparsed) == text);
  CHECK(config_hash(reparsed) == config_hash(defaults));

  // Absent sections fall back to defaults.
  const ExperimentConfig empty = parse_config("{}");
  CHECK(serialize_config(empty) == text);

  CHECK_THROWS_AS((void)parse_config("{not json"), ConfigError);
}

TEST_CASE("config hash ignores where artifacts land") {
  ExperimentConfig a = tiny_config("somewhere");
  ExperimentConfig b = a;
  b.out_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.seed = a.seed + 1;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("unknown keys are rejected with their dotted path") {
  CHECK_THROWS_WITH_AS((void)parse_config(R"({"corpus": {"typo": 1}})"),
                       doctest::Contains("corpus.typo"), ConfigError);
  CHECK_THROWS_AS((void)parse_config(R"({"surprise": 1})"), ConfigError);
}

TEST_CASE("validation rejects out-of-range and inconsistent fields") {
  CHECK_THROWS_AS((void)with_field("corpus.languages", json::array({"lat"})),
                  ConfigError);
  CHECK_THROWS_AS((void)with_field("corpus.target", "und"), ConfigError);
  CHECK_THROWS_AS((void)with_field("corpus.overlaps",
                                   json{{"cyr-gre", 0.25}, {"cyr-lat", 0.75}}),
                  ConfigError);  // gre-lat pair missing
  CHECK_THROWS_AS((void)with_field("corpus.overlaps",
                                   json{{"cyr-gre", 1.5},
                                        {"cyr-lat", 0.75},
                                        {"gre-lat", 0.5}}),
                  ConfigError);
  CHECK_THROWS_AS((void)with_field("corpus.inventory_size", 1), ConfigError);
  CHECK_THROWS_AS((void)with_field("corpus.max_duration", 1), ConfigError);
  CHECK_THROWS_AS((void)with_field("corpus.target_train_fraction", 1.5),
                  ConfigError);
  CHECK_THROWS_AS((void)with_field("training.alpha", -0.2), ConfigError);
  CHECK_THROWS_AS((void)with_field("training.lambda", 2.0), ConfigError);
  CHECK_THROWS_AS((void)with_field("training.saw_tau", 0.0), ConfigError);
  CHECK_THROWS_AS((void)with_field("training.asr_lr", 0.0), ConfigError);
  CHECK_THROWS_AS((void)with_field("training.seed", -1), ConfigError);
  CHECK_THROWS_AS((void)with_field("decode.beam_size", 0), ConfigError);
  CHECK_THROWS_AS((void)with_field("strategies", json::array({"avg"})),
                  ConfigError);
  CHECK_THROWS_AS((void)with_field("strategies", json::array({"ta", "ta"})),
                  ConfigError);
  CHECK_THROWS_AS((void)with_field("training.ftw_weights",
                                   json::array({0.5, 0.3, 0.2})),
                  ConfigError);  // three weights, two source languages
  CHECK_THROWS_AS((void)with_field("out_dir", ""), ConfigError);
}

TEST_CASE("load_config applies overrides then the MUST_OUT environment") {
  const fs::path dir = fresh_dir("must_harness_cfg");
  const fs::path path = dir / "cfg.json";
  std::ofstream(path) << serialize_config(tiny_config("from-file"));

  SUBCASE("dotted overrides parse as JSON with a string fallback") {
    const ExperimentConfig cfg = load_config(
        path.string(), {"training.lambda=0.75", "corpus.train_utts=10",
                        "training.cache_soft_labels=false",
                        "corpus.target=gre", "out_dir=overridden"});
    CHECK(cfg.lambda == 0.75);
    CHECK(cfg.train_utts == 10);
    CHECK(cfg.cache_soft_labels == false);
    CHECK(cfg.target == "gre");  // bare word, not valid JSON, kept as string
    CHECK(cfg.out_dir == "overridden");
  }

  SUBCASE("malformed overrides are rejected") {
    CHECK_THROWS_AS((void)load_config(path.string(), {"noequals"}),
                    ConfigError);
    CHECK_THROWS_AS((void)load_config(path.string(), {"=3"}), ConfigError);
    CHECK_THROWS_AS((void)load_config(path.string(), {"corpus..x=3"}),
                    ConfigError);
    CHECK_THROWS_AS(
        (void)load_config(path.string(), {"training.lambda.deep=3"}),
        ConfigError);
  }

  SUBCASE("MUST_OUT wins over both the file and --set") {
    setenv("MUST_OUT", (dir / "env-out").c_str(), 1);
    const ExperimentConfig cfg =
        load_config(path.string(), {"out_dir=ignored"});
    unsetenv("MUST_OUT");
    CHECK(cfg.out_dir == (dir / "env-out").string());
  }

  SUBCASE("missing files are a config error") {
    CHECK_THROWS_AS((void)load_config((dir / "absent.json").string()),
                    ConfigError);
  }
  fs::remove_all(dir);
}

TEST_CASE("stages enforce their dependency order") {
  const fs::path dir = fresh_dir("must_harness_deps");
  const ExperimentConfig cfg = tiny_config((dir / "out").string());
  CHECK_THROWS_AS(run_stage(cfg, "distill"), DependencyError);
  CHECK_THROWS_AS(run_stage(cfg, "no-such-stage"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("the full pipeline is idempotent and deterministic") {
  const fs::path dir = fresh_dir("must_harness_runall");
  const ExperimentConfig cfg = tiny_config((dir / "out").string());
  run_all(cfg);

  const fs::path out = dir / "out";
  for (const char* rel :
       {"models/asr_lat.ckpt", "models/asr_gre.ckpt", "models/mapping.ckpt",
        "models/student_mono.ckpt", "models/student_st.ckpt",
        "reports/mapping_accuracy.csv", "reports/fusion_cer.csv",
        "reports/student_cer.csv", "reports/summary.md",
        "logs/train_asr_lat.csv", "logs/fusion_st.jsonl"}) {
    CHECK_MESSAGE(fs::exists(out / rel), rel << " missing");
  }

  const auto first = report_bytes(out);
  run_all(cfg);  // every stage should be skipped as up to date
  CHECK(report_bytes(out) == first);

  // A second tree built from the same config carries identical reports.
  const fs::path dir2 = fresh_dir("must_harness_runall2");
  ExperimentConfig cfg2 = cfg;
  cfg2.out_dir = (dir2 / "out").string();
  run_all(cfg2);
  CHECK(report_bytes(dir2 / "out") == first);

  SUBCASE("tampered artifacts are caught and can be healed") {
    std::ofstream(out / "models" / "asr_lat.ckpt",
                  std::ios::binary | std::ios::app)
        << "garbage";
    CHECK_THROWS_AS(run_stage(cfg, "train-mapping"), DependencyError);
    run_stage(cfg, "train-asr");  // rewrites the damaged artifact
    CHECK_NOTHROW(run_stage(cfg, "train-mapping"));
    CHECK(report_bytes(out) == first);
  }

  SUBCASE("a different config refuses to overwrite without force") {
    ExperimentConfig other = cfg;
    other.seed = cfg.seed + 1;
    CHECK_THROWS_WITH_AS(run_stage(other, "gen-data"),
                         doctest::Contains("--force"), ConfigError);
    CHECK_NOTHROW(run_stage(other, "gen-data", true));
  }

  fs::remove_all(dir);
  fs::remove_all(dir2);
}
