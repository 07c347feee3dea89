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
#include <string>
#include <vector>

#include <doctest.h>

#include "must/asr.hpp"
#include "must/errors.hpp"
#include "must/mesd.hpp"
#include "must/rng.hpp"
#include "must/synth.hpp"
#include "must/tensor.hpp"

using namespace must;

namespace {

// Two sources plus a target with substantial overlap; small enough that
// the whole fixture trains in well under a second.
struct MesdSetup {
  std::vector<LanguageSpec> specs;  // src_a, src_b, tgt
  AsrModel src_a, src_b, tgt;
  std::vector<Utterance> tgt_corpus;
};

MesdSetup mesd_setup(std::uint64_t seed = 13) {
  FamilyConfig fam;
  fam.language_ids = {"src_a", "src_b", "tgt"};
  fam.overlap = {{1.0, 0.5, 0.75}, {0.5, 1.0, 0.5}, {0.75, 0.5, 1.0}};
  fam.inventory_size = 6;
  fam.feature_dim = 4;
  fam.seed = seed;
  MesdSetup s;
  s.specs = generate_family(fam);
  auto train_one = [&](const LanguageSpec& spec, std::uint64_t lang_seed) {
    std::vector<Utterance> corpus;
    for (int i = 0; i < 8; ++i) {
      corpus.push_back(synthesize_utterance(
          spec, 3, lang_seed * 1000 + i,
          spec.language_id + "_train_" + std::to_string(i)));
    }
    TrainHyper h;
    h.epochs = 2;
    h.hidden = 6;
    h.seed = lang_seed;
    h.vocab = Vocab{spec.character_set};
    return train_asr(corpus, h, nullptr);
  };
  s.src_a = train_one(s.specs[0], 1);
  s.src_b = train_one(s.specs[1], 2);
  s.tgt = train_one(s.specs[2], 3);
  for (int i = 0; i < 10; ++i) {
    s.tgt_corpus.push_back(synthesize_utterance(
        s.specs[2], 3, 7000 + i, "tgt_map_" + std::to_string(i)));
  }
  return s;
}

PosteriorSequence make_posts(const std::string& lang,
                             std::initializer_list<std::initializer_list<double>> rows) {
  PosteriorSequence p;
  p.language_id = lang;
  p.frames = Tensor::matrix(rows);
  return p;
}

}  // namespace

TEST_CASE("kl_frame_loss is zero at equality and positive otherwise") {
  const auto p = make_posts("x", {{0.7, 0.3}, {0.2, 0.8}});
  CHECK(kl_frame_loss(p, p) == doctest::Approx(0.0).epsilon(1e-12));

  const auto q = make_posts("x", {{0.5, 0.5}, {0.5, 0.5}});
  const double kl01 = 0.7 * std::log(0.7 / 0.5) + 0.3 * std::log(0.3 / 0.5) +
                      0.2 * std::log(0.2 / 0.5) + 0.8 * std::log(0.8 / 0.5);
  CHECK(kl_frame_loss(p, q) == doctest::Approx(kl01).epsilon(1e-9));
  CHECK(kl_frame_loss(p, q) > 0.0);
}

TEST_CASE("kl_frame_loss rejects misaligned sequences") {
  const auto p = make_posts("x", {{0.7, 0.3}});
  const auto longer = make_posts("x", {{0.7, 0.3}, {0.2, 0.8}});
  const auto wider = make_posts("x", {{0.5, 0.25, 0.25}});
  CHECK_THROWS_AS((void)kl_frame_loss(p, longer), NumericalError);
  CHECK_THROWS_AS((void)kl_frame_loss(p, wider), NumericalError);
  const auto invalid = make_posts("x", {{0.9, 0.3}});
  CHECK_THROWS_AS((void)kl_frame_loss(p, invalid), NumericalError);
}

TEST_CASE("rank_sum_weights closed forms") {
  SUBCASE("two losses") {
    const auto w = rank_sum_weights({5.0, 1.0});
    REQUIRE(w.size() == 2);
    CHECK(w[0] == 2.0 * 2.0 / 6.0);  // rank 1
    CHECK(w[1] == 2.0 * 1.0 / 6.0);  // rank 2
  }
  SUBCASE("three losses in mixed order") {
    const auto w = rank_sum_weights({1.0, 9.0, 4.0});
    REQUIRE(w.size() == 3);
    CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-15));        // largest
    CHECK(w[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));  // middle
    CHECK(w[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));  // smallest
  }
  SUBCASE("four losses") {
    const auto w = rank_sum_weights({4.0, 3.0, 2.0, 1.0});
    const std::vector<double> want{0.4, 0.3, 0.2, 0.1};
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(w[i] == doctest::Approx(want[i]).epsilon(1e-15));
    }
  }
  SUBCASE("ties rank the earlier index higher") {
    const auto w = rank_sum_weights({2.0, 2.0});
    CHECK(w[0] > w[1]);
  }
  SUBCASE("weights always sum to one") {
    Rng rng(3);
    for (int k = 1; k <= 5; ++k) {
      std::vector<double> losses;
      for (int i = 0; i < k; ++i) losses.push_back(rng.uniform(0.0, 10.0));
      const auto w = rank_sum_weights(losses);
      double sum = 0.0;
      for (double v : w) sum += v;
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
  CHECK_THROWS_AS((void)rank_sum_weights({}), ConfigError);
}

TEST_CASE("training yields a mapping whose outputs are valid posteriors") {
  MesdSetup s = mesd_setup();
  MesdHyper h;
  h.epochs = 2;
  h.hidden = 8;
  h.seed = 99;
  std::vector<MesdLogRow> log;
  const MesdModel m =
      train_mesd(s.tgt, {s.src_a, s.src_b}, s.tgt_corpus, h, &log);
  CHECK(m.target_language == "tgt");
  CHECK(m.source_languages == std::vector<std::string>{"src_a", "src_b"});
  CHECK(m.output_dim == s.tgt.output_dim());
  REQUIRE(log.size() == h.epochs * s.tgt_corpus.size());
  for (const MesdLogRow& row : log) {
    REQUIRE(row.pair_losses.size() == 2);
    REQUIRE(row.weights.size() == 2);
    double sum = 0.0, combined = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(row.pair_losses[k] >= 0.0);
      sum += row.weights[k];
      combined += row.weights[k] * row.pair_losses[k];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(std::abs(combined - row.combined) <= 1e-9);
  }

  const Utterance probe = synthesize_utterance(s.specs[0], 3, 31337, "probe");
  const PosteriorSequence mapped =
      map_posteriors(m, "src_a", frame_posteriors(s.src_a, probe));
  CHECK(mapped.language_id == "tgt");
  CHECK(mapped.length() == probe.features.rows());
  CHECK(mapped.dim() == s.tgt.output_dim());
  for (std::size_t r = 0; r < mapped.length(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < mapped.dim(); ++c) {
      CHECK(mapped.frames.at(r, c) >= 0.0);
      sum += mapped.frames.at(r, c);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("rank weighting matches rank_sum_weights on the logged losses") {
  MesdSetup s = mesd_setup(29);
  MesdHyper h;
  h.epochs = 1;
  h.hidden = 6;
  h.seed = 5;
  h.rank_weighting = true;
  std::vector<MesdLogRow> log;
  (void)train_mesd(s.tgt, {s.src_a, s.src_b}, s.tgt_corpus, h, &log);
  for (const MesdLogRow& row : log) {
    const auto want = rank_sum_weights(row.pair_losses);
    REQUIRE(want.size() == row.weights.size());
    for (std::size_t k = 0; k < want.size(); ++k) {
      CHECK(row.weights[k] == want[k]);
    }
  }
  h.rank_weighting = false;
  log.clear();
  (void)train_mesd(s.tgt, {s.src_a, s.src_b}, s.tgt_corpus, h, &log);
  for (const MesdLogRow& row : log) {
    for (double w : row.weights) CHECK(w == 0.5);
  }
}

TEST_CASE("map_posteriors rejects unknown languages and wrong tags") {
  MesdSetup s = mesd_setup(41);
  MesdHyper h;
  h.epochs = 1;
  h.hidden = 6;
  h.seed = 1;
  const MesdModel m = train_mesd(s.tgt, {s.src_a}, s.tgt_corpus, h);
  const Utterance probe = synthesize_utterance(s.specs[0], 3, 1, "p");
  const PosteriorSequence posts = frame_posteriors(s.src_a, probe);
  CHECK_THROWS_AS((void)map_posteriors(m, "src_b", posts), ConfigError);
  PosteriorSequence mislabeled = posts;
  mislabeled.language_id = "tgt";
  CHECK_THROWS_AS((void)map_posteriors(m, "src_a", mislabeled), ConfigError);
}

TEST_CASE("train_mesd validates its inputs") {
  MesdSetup s = mesd_setup(43);
  MesdHyper h;
  h.epochs = 1;
  h.hidden = 4;
  CHECK_THROWS_AS((void)train_mesd(s.tgt, {}, s.tgt_corpus, h), ConfigError);
  CHECK_THROWS_AS((void)train_mesd(s.tgt, {s.tgt}, s.tgt_corpus, h),
                  ConfigError);
  CHECK_THROWS_AS((void)train_mesd(s.tgt, {s.src_a, s.src_a}, s.tgt_corpus, h),
                  ConfigError);
  CHECK_THROWS_AS((void)train_mesd(s.tgt, {s.src_a}, {}, h), ConfigError);
  // Corpus utterances must belong to the target language.
  const std::vector<Utterance> wrong{
      synthesize_utterance(s.specs[0], 3, 2, "w")};
  CHECK_THROWS_AS((void)train_mesd(s.tgt, {s.src_a}, wrong, h), ConfigError);
}

TEST_CASE("mapping accuracy counts argmax agreement and round trips disk") {
  MesdSetup s = mesd_setup(47);
  MesdHyper h;
  h.epochs = 2;
  h.hidden = 8;
  h.seed = 11;
  const MesdModel m = train_mesd(s.tgt, {s.src_a, s.src_b}, s.tgt_corpus, h);

  std::vector<Utterance> held_out;
  for (int i = 0; i < 4; ++i) {
    held_out.push_back(
        synthesize_utterance(s.specs[2], 3, 9000 + i, "ho_" + std::to_string(i)));
  }
  const MappingAccuracy acc =
      mapping_accuracy(m, "src_a", s.tgt, s.src_a, held_out);
  std::size_t frames = 0;
  for (const auto& u : held_out) frames += u.features.rows();
  CHECK(acc.total_frames == frames);
  CHECK(acc.correctly_mapped_frames <= acc.total_frames);
  CHECK(acc.ratio == doctest::Approx(static_cast<double>(
                         acc.correctly_mapped_frames) /
                     static_cast<double>(acc.total_frames)));

  const auto dir = std::filesystem::temp_directory_path() / "must_mesd_ckpt";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "mapping.ckpt").string();
  save_mesd_model(m, path);
  const MesdModel loaded = load_mesd_model(path);
  CHECK(loaded.target_language == m.target_language);
  CHECK(loaded.source_languages == m.source_languages);
  CHECK(loaded.input_dims == m.input_dims);
  CHECK(loaded.hidden == m.hidden);
  CHECK(loaded.output_dim == m.output_dim);
  for (const auto& [name, value] : m.params) {
    CHECK(bit_equal(value, loaded.params.at(name)));
  }
  const MappingAccuracy again =
      mapping_accuracy(loaded, "src_a", s.tgt, s.src_a, held_out);
  CHECK(again.correctly_mapped_frames == acc.correctly_mapped_frames);
  std::filesystem::remove_all(dir);
}
