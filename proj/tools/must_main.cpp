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

#include <exception>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "must/errors.hpp"
#include "must/harness.hpp"

namespace {

const std::map<std::string, std::string>& stage_blurbs() {
  static const std::map<std::string, std::string> blurbs{
      {"gen-data", "Synthesize the multilingual corpus"},
      {"train-asr", "Train one recognizer per language on its train split"},
      {"train-mapping", "Train the source-to-target posterior mapping"},
      {"eval-mapping", "Score mapping accuracy per source language"},
      {"fuse-teachers", "Decode fused teacher posteriors for every strategy"},
      {"distill", "Train the baseline and one distilled student per strategy"},
      {"eval-asr", "Decode every student on the eval split"},
      {"report", "Assemble the summary report"},
  };
  return blurbs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"must: multilingual student-teacher training harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "must 0.1.0");

  std::string config_path;
  std::vector<std::string> overrides;
  bool force = false;
  std::string chosen;

  auto add_stage = [&](const std::string& name, const std::string& blurb) {
    CLI::App* sub = app.add_subcommand(name, blurb);
    sub->add_option("--config", config_path, "experiment config (JSON)")
        ->required();
    sub->add_option("--set", overrides,
                    "dotted-path override, e.g. training.lambda=0.7");
    sub->add_flag("--force", force,
                  "overwrite artifacts left by a different config");
    sub->callback([&chosen, name] { chosen = name; });
  };
  for (const std::string& stage : must::stage_names()) {
    add_stage(stage, stage_blurbs().at(stage));
  }
  add_stage("run-all", "Run every stage in order");

  CLI11_PARSE(app, argc, argv);

  try {
    const must::ExperimentConfig cfg = must::load_config(config_path, overrides);
    if (chosen == "run-all") {
      must::run_all(cfg, force);
    } else {
      must::run_stage(cfg, chosen, force);
    }
  } catch (const must::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const must::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << "\n";
    return 3;
  } catch (const must::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
