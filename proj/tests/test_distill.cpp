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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <doctest.h>

#include "must/asr.hpp"
#include "must/distill.hpp"
#include "must/ensemble.hpp"
#include "must/errors.hpp"
#include "must/mesd.hpp"
#include "must/synth.hpp"
#include "must/tensor.hpp"

using namespace must;

namespace {

struct DistillSetup {
  std::vector<LanguageSpec> specs;  // src_a, src_b, tgt
  std::vector<TeacherPipeline> pipelines;
  std::vector<Utterance> low;  // low-resource target train split
  TrainHyper hyper;
};

DistillSetup distill_setup(std::uint64_t seed = 3) {
  FamilyConfig fam;
  fam.language_ids = {"src_a", "src_b", "tgt"};
  fam.overlap = {{1.0, 0.5, 0.75}, {0.5, 1.0, 0.5}, {0.75, 0.5, 1.0}};
  fam.inventory_size = 6;
  fam.feature_dim = 4;
  fam.seed = seed;
  DistillSetup s;
  s.specs = generate_family(fam);

  auto train_one = [&](const LanguageSpec& spec, std::uint64_t lang_seed) {
    std::vector<Utterance> corpus;
    for (int i = 0; i < 8; ++i) {
      corpus.push_back(synthesize_utterance(
          spec, 3, lang_seed * 500 + i,
          spec.language_id + "_train_" + std::to_string(i)));
    }
    TrainHyper h;
    h.epochs = 2;
    h.hidden = 6;
    h.seed = lang_seed;
    h.vocab = Vocab{spec.character_set};
    return train_asr(corpus, h, nullptr);
  };
  const AsrModel src_a = train_one(s.specs[0], 1);
  const AsrModel src_b = train_one(s.specs[1], 2);
  const AsrModel tgt = train_one(s.specs[2], 3);

  std::vector<Utterance> map_corpus;
  for (int i = 0; i < 8; ++i) {
    map_corpus.push_back(synthesize_utterance(s.specs[2], 3, 4000 + i,
                                              "tgt_map_" + std::to_string(i)));
  }
  MesdHyper mh;
  mh.epochs = 2;
  mh.hidden = 8;
  mh.seed = 17;
  const MesdModel mapping = train_mesd(tgt, {src_a, src_b}, map_corpus, mh);

  s.pipelines.push_back({src_a, mapping, "src_a", "tgt"});
  s.pipelines.push_back({src_b, mapping, "src_b", "tgt"});

  for (int i = 0; i < 4; ++i) {
    s.low.push_back(synthesize_utterance(s.specs[2], 3, 8000 + i,
                                         "tgt_low_" + std::to_string(i)));
  }
  s.hyper.alpha = 0.3;
  s.hyper.lambda = 0.5;
  s.hyper.epochs = 2;
  s.hyper.hidden = 6;
  s.hyper.seed = 77;
  s.hyper.vocab = Vocab{s.specs[2].character_set};
  return s;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("teacher pipelines validate and emit aligned soft labels") {
  DistillSetup s = distill_setup();
  CHECK_NOTHROW(validate_pipeline(s.pipelines[0]));

  TeacherPipeline wrong_lang = s.pipelines[0];
  wrong_lang.source_language = "src_b";  // recognizer is for src_a
  CHECK_THROWS_AS(validate_pipeline(wrong_lang), ConfigError);

  TeacherPipeline wrong_target = s.pipelines[0];
  wrong_target.target_language = "src_b";
  CHECK_THROWS_AS(validate_pipeline(wrong_target), ConfigError);

  const Utterance& utt = s.low[0];
  const PosteriorSequence soft = teacher_soft_labels(s.pipelines[0], utt);
  CHECK(soft.language_id == "tgt");
  CHECK(soft.length() == utt.features.rows());
  CHECK(soft.dim() == s.hyper.vocab.dim());
  for (std::size_t r = 0; r < soft.length(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < soft.dim(); ++c) sum += soft.frames.at(r, c);
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
  // Wrong-language utterances are refused.
  const Utterance foreign = synthesize_utterance(s.specs[0], 3, 1, "f");
  CHECK_THROWS_AS((void)teacher_soft_labels(s.pipelines[0], foreign),
                  ConfigError);
}

TEST_CASE("kd_loss equals the summed per-frame KL divergence") {
  PosteriorSequence teacher, student;
  teacher.language_id = student.language_id = "tgt";
  teacher.frames = Tensor::matrix({{0.8, 0.2}, {0.3, 0.7}});
  student.frames = Tensor::matrix({{0.6, 0.4}, {0.5, 0.5}});
  const double want = 0.8 * std::log(0.8 / 0.6) + 0.2 * std::log(0.2 / 0.4) +
                      0.3 * std::log(0.3 / 0.5) + 0.7 * std::log(0.7 / 0.5);
  CHECK(kd_loss(student, teacher) == doctest::Approx(want).epsilon(1e-9));
  CHECK(kd_loss(teacher, teacher) == doctest::Approx(0.0).epsilon(1e-12));

  PosteriorSequence short_student = student;
  short_student.frames = Tensor::matrix({{0.6, 0.4}});
  CHECK_THROWS_AS((void)kd_loss(short_student, teacher), NumericalError);
}

TEST_CASE("ensemble_kd_loss dispatches by strategy") {
  PosteriorSequence student;
  student.language_id = "tgt";
  student.frames = Tensor::matrix({{0.5, 0.5}});
  TeacherOutputs outputs;
  outputs.teacher_ids = {"src_a", "src_b"};
  PosteriorSequence a, b;
  a.language_id = b.language_id = "tgt";
  a.frames = Tensor::matrix({{0.9, 0.1}});
  b.frames = Tensor::matrix({{0.4, 0.6}});
  outputs.posteriors = {a, b};

  const double kd_a = kd_loss(student, a);
  const double kd_b = kd_loss(student, b);

  WeightingStrategy ws;
  ws.kind = StrategyKind::kTa;
  CHECK(ensemble_kd_loss(student, outputs, ws) ==
        doctest::Approx(0.5 * kd_a + 0.5 * kd_b).epsilon(1e-12));

  ws.kind = StrategyKind::kSaw;
  ws.tau = 10.0;
  const auto w = weights_saw(outputs, 10.0);
  CHECK(ensemble_kd_loss(student, outputs, ws) ==
        doctest::Approx(w[0] * kd_a + w[1] * kd_b).epsilon(1e-12));

  ws.kind = StrategyKind::kFtw;
  ws.fixed_weights = {0.25, 0.75};
  CHECK(ensemble_kd_loss(student, outputs, ws) ==
        doctest::Approx(0.25 * kd_a + 0.75 * kd_b).epsilon(1e-12));

  ws.kind = StrategyKind::kEs;  // teacher a is the more confident
  CHECK(ensemble_kd_loss(student, outputs, ws) ==
        doctest::Approx(kd_a).epsilon(1e-12));

  ws.kind = StrategyKind::kSt;
  ws.selected_teacher = "src_b";
  CHECK(ensemble_kd_loss(student, outputs, ws) ==
        doctest::Approx(kd_b).epsilon(1e-12));
  ws.selected_teacher = "nope";
  CHECK_THROWS_AS((void)ensemble_kd_loss(student, outputs, ws), ConfigError);

  ws.kind = StrategyKind::kFwm;
  ws.selected_teacher.clear();
  CHECK(ensemble_kd_loss(student, outputs, ws) ==
        doctest::Approx(kd_loss(student, select_fwm(outputs))).epsilon(1e-12));
}

TEST_CASE("must_total_loss recomposes and rejects bad coefficients") {
  CHECK(must_total_loss(2.0, 1.0, 0.5, 0.3, 0.5) ==
        doctest::Approx(0.3 * 2.0 + 0.7 * (0.5 * 0.5 + 0.5 * 1.0))
            .epsilon(1e-15));
  CHECK(must_total_loss(2.0, 1.0, 0.0, 1.0, 0.0) == 2.0);
  CHECK_THROWS_AS((void)must_total_loss(1.0, 1.0, 1.0, -0.1, 0.5),
                  ConfigError);
  CHECK_THROWS_AS((void)must_total_loss(1.0, 1.0, 1.0, 0.5, 1.1),
                  ConfigError);
}

TEST_CASE("logged components recompose to the logged total exactly") {
  DistillSetup s = distill_setup();
  DistillConfig cfg;
  cfg.hyper = s.hyper;
  cfg.strategy.kind = StrategyKind::kTa;
  std::vector<BatchLogRow> log;
  (void)train_student(s.low, s.pipelines, cfg, &log);
  REQUIRE(log.size() == s.hyper.epochs * s.low.size());
  for (const BatchLogRow& row : log) {
    CHECK(row.teacher_weights.size() == 2);
    const double recomposed = must_total_loss(row.l_ctc, row.l_ce, row.l_kd,
                                              s.hyper.alpha, s.hyper.lambda);
    CHECK(std::abs(recomposed - row.total) <= 1e-9);
    CHECK(row.l_kd > 0.0);
  }
}

TEST_CASE("lambda zero distillation is bit-identical to plain training") {
  DistillSetup s = distill_setup(7);
  TrainHyper h = s.hyper;
  h.lambda = 0.0;

  std::vector<BatchLogRow> log_plain, log_student;
  const AsrModel plain = train_asr(s.low, h, &log_plain);
  DistillConfig cfg;
  cfg.hyper = h;
  cfg.strategy.kind = StrategyKind::kSaw;  // irrelevant at lambda zero
  std::map<std::string, std::size_t> invocations;
  const AsrModel student =
      train_student(s.low, s.pipelines, cfg, &log_student, &invocations);

  for (const auto& [name, value] : plain.params) {
    CHECK(bit_equal(value, student.params.at(name)));
  }
  REQUIRE(log_plain.size() == log_student.size());
  for (std::size_t i = 0; i < log_plain.size(); ++i) {
    CHECK(log_plain[i].total == log_student[i].total);
    CHECK(log_student[i].l_kd == 0.0);
  }
  CHECK(invocations.empty());  // teachers never ran

  // Checkpoint files are byte-identical too.
  const auto dir = std::filesystem::temp_directory_path() / "must_lambda0";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  save_asr_model(plain, (dir / "plain.ckpt").string());
  save_asr_model(student, (dir / "student.ckpt").string());
  CHECK(file_bytes((dir / "plain.ckpt").string()) ==
        file_bytes((dir / "student.ckpt").string()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("single-teacher training touches only the selected pipeline") {
  DistillSetup s = distill_setup(11);
  DistillConfig cfg;
  cfg.hyper = s.hyper;
  cfg.strategy.kind = StrategyKind::kSt;
  cfg.strategy.selected_teacher = "src_b";
  std::vector<BatchLogRow> log;
  std::map<std::string, std::size_t> invocations;
  (void)train_student(s.low, s.pipelines, cfg, &log, &invocations);
  CHECK(invocations.count("src_a") == 0);
  CHECK(invocations.at("src_b") == s.hyper.epochs * s.low.size());
  for (const BatchLogRow& row : log) {
    // Only the selected teacher feeds the distillation term.
    REQUIRE(row.teacher_weights.size() == 1);
    CHECK(row.teacher_weights[0] == 1.0);
  }
}

TEST_CASE("soft-label caching changes invocation counts but not results") {
  DistillSetup s = distill_setup(13);
  DistillConfig cached;
  cached.hyper = s.hyper;
  cached.strategy.kind = StrategyKind::kTa;
  cached.cache_soft_labels = true;
  DistillConfig uncached = cached;
  uncached.cache_soft_labels = false;

  std::map<std::string, std::size_t> inv_cached, inv_uncached;
  const AsrModel a = train_student(s.low, s.pipelines, cached, nullptr,
                                   &inv_cached);
  const AsrModel b = train_student(s.low, s.pipelines, uncached, nullptr,
                                   &inv_uncached);
  CHECK(inv_cached.at("src_a") == s.low.size());
  CHECK(inv_uncached.at("src_a") == s.hyper.epochs * s.low.size());
  for (const auto& [name, value] : a.params) {
    CHECK(bit_equal(value, b.params.at(name)));
  }
}

TEST_CASE("distillation configs are validated") {
  DistillSetup s = distill_setup(17);
  DistillConfig cfg;
  cfg.hyper = s.hyper;  // lambda 0.5

  CHECK_THROWS_AS((void)train_student(s.low, {}, cfg), ConfigError);

  cfg.strategy.kind = StrategyKind::kFtw;
  cfg.strategy.fixed_weights = {0.5};  // wrong arity
  CHECK_THROWS_AS((void)train_student(s.low, s.pipelines, cfg), ConfigError);
  cfg.strategy.fixed_weights = {0.7, 0.7};  // does not sum to one
  CHECK_THROWS_AS((void)train_student(s.low, s.pipelines, cfg), ConfigError);

  cfg.strategy.kind = StrategyKind::kSt;
  cfg.strategy.selected_teacher = "absent";
  CHECK_THROWS_AS((void)train_student(s.low, s.pipelines, cfg), ConfigError);

  // Duplicate source languages in the ensemble are rejected.
  cfg.strategy.kind = StrategyKind::kTa;
  cfg.strategy.selected_teacher.clear();
  std::vector<TeacherPipeline> dup{s.pipelines[0], s.pipelines[0]};
  CHECK_THROWS_AS((void)train_student(s.low, dup, cfg), ConfigError);
}
