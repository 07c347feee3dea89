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
#include <map>
#include <string>
#include <vector>

#include <doctest.h>

#include "must/ensemble.hpp"
#include "must/errors.hpp"
#include "must/rng.hpp"
#include "must/tensor.hpp"

using namespace must;

namespace {

PosteriorSequence posts(std::initializer_list<std::initializer_list<double>> rows) {
  PosteriorSequence p;
  p.language_id = "tgt";
  p.frames = Tensor::matrix(rows);
  return p;
}

TeacherOutputs two_teachers() {
  TeacherOutputs out;
  out.teacher_ids = {"src_a", "src_b"};
  out.posteriors = {posts({{0.9, 0.1}, {0.6, 0.4}}),
                    posts({{0.5, 0.5}, {0.2, 0.8}})};
  return out;
}

}  // namespace

TEST_CASE("strategy tags round trip and reject unknowns") {
  const std::vector<std::string> tags{"ta", "fwm", "es", "saw", "ftw", "st"};
  for (const std::string& tag : tags) {
    CHECK(strategy_name(parse_strategy(tag)) == tag);
  }
  CHECK_THROWS_AS((void)parse_strategy("avg"), ConfigError);
  CHECK_THROWS_AS((void)parse_strategy(""), ConfigError);
}

TEST_CASE("teacher outputs are validated for alignment") {
  CHECK_THROWS_AS(validate_teacher_outputs(TeacherOutputs{}), ConfigError);

  TeacherOutputs mismatch = two_teachers();
  mismatch.teacher_ids.pop_back();
  CHECK_THROWS_AS(validate_teacher_outputs(mismatch), ConfigError);

  TeacherOutputs dup = two_teachers();
  dup.teacher_ids[1] = "src_a";
  CHECK_THROWS_AS(validate_teacher_outputs(dup), ConfigError);

  TeacherOutputs ragged = two_teachers();
  ragged.posteriors[1] = posts({{0.5, 0.5}});
  CHECK_THROWS_AS(validate_teacher_outputs(ragged), NumericalError);

  TeacherOutputs languages = two_teachers();
  languages.posteriors[1].language_id = "other";
  CHECK_THROWS_AS(validate_teacher_outputs(languages), ConfigError);

  CHECK_NOTHROW(validate_teacher_outputs(two_teachers()));
}

TEST_CASE("uniform weights") {
  const auto w = weights_ta(4);
  REQUIRE(w.size() == 4);
  for (double v : w) CHECK(v == 0.25);
  CHECK_THROWS_AS((void)weights_ta(0), ConfigError);
}

TEST_CASE("mean max confidence averages row maxima") {
  const auto p = posts({{0.9, 0.1}, {0.3, 0.7}});
  CHECK(mean_max_confidence(p) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("confidence softmax weighting") {
  TeacherOutputs out;
  out.teacher_ids = {"a", "b"};
  out.posteriors = {posts({{0.9, 0.1}}), posts({{0.5, 0.5}})};

  SUBCASE("tau one is uniform") {
    const auto w = weights_saw(out, 1.0);
    CHECK(w[0] == 0.5);
    CHECK(w[1] == 0.5);
  }
  SUBCASE("known value at tau ten") {
    const auto w = weights_saw(out, 10.0);
    CHECK(std::abs(w[0] - 0.7153) <= 1e-4);
    CHECK(std::abs(w[1] - 0.2847) <= 1e-4);
    CHECK(std::abs(w[0] + w[1] - 1.0) <= 1e-9);
  }
  SUBCASE("tau above one orders weights by confidence") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      TeacherOutputs probe;
      std::vector<double> mu;
      for (int k = 0; k < 3; ++k) {
        const double m = rng.uniform(0.5, 0.99);
        mu.push_back(m);
        probe.teacher_ids.push_back(std::string(1, char('a' + k)));
        probe.posteriors.push_back(posts({{m, 1.0 - m}}));
      }
      const auto w = weights_saw(probe, 10.0);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          if (mu[i] > mu[j]) CHECK(w[i] > w[j]);
        }
      }
    }
  }
  CHECK_THROWS_AS((void)weights_saw(out, 0.0), ConfigError);
}

TEST_CASE("frame-wise max copies the most confident row per frame") {
  const TeacherOutputs out = two_teachers();
  // Frame 0: teacher a (0.9 vs 0.5); frame 1: teacher b (0.8 vs 0.6).
  const PosteriorSequence sel = select_fwm(out);
  CHECK(sel.frames.at(0, 0) == 0.9);
  CHECK(sel.frames.at(0, 1) == 0.1);
  CHECK(sel.frames.at(1, 0) == 0.2);
  CHECK(sel.frames.at(1, 1) == 0.8);
  CHECK(sel.language_id == "tgt");

  // Ties resolve toward the lower teacher index.
  TeacherOutputs tie;
  tie.teacher_ids = {"a", "b"};
  tie.posteriors = {posts({{0.7, 0.3}}), posts({{0.3, 0.7}})};
  const PosteriorSequence t = select_fwm(tie);
  CHECK(t.frames.at(0, 0) == 0.7);
}

TEST_CASE("elitist selection takes the most confident teacher") {
  const TeacherOutputs out = two_teachers();
  // mu_a = (0.9 + 0.6)/2 = 0.75; mu_b = (0.5 + 0.8)/2 = 0.65.
  CHECK(select_es(out) == 0);

  TeacherOutputs tie;
  tie.teacher_ids = {"a", "b"};
  tie.posteriors = {posts({{0.6, 0.4}}), posts({{0.4, 0.6}})};
  CHECK(select_es(tie) == 0);
}

TEST_CASE("single-teacher selection by accuracy with lexicographic ties") {
  CHECK(select_st({{"lat", 0.31}, {"gre", 0.52}, {"heb", 0.52}}) == "gre");
  CHECK(select_st({{"zzz", 0.9}}) == "zzz");
  CHECK_THROWS_AS((void)select_st({}), ConfigError);
}

TEST_CASE("fusion forms a convex combination and validates weights") {
  const TeacherOutputs out = two_teachers();
  const PosteriorSequence fused = fuse(out, {0.25, 0.75});
  CHECK(fused.frames.at(0, 0) ==
        doctest::Approx(0.25 * 0.9 + 0.75 * 0.5).epsilon(1e-12));
  for (std::size_t r = 0; r < fused.length(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < fused.dim(); ++c) sum += fused.frames.at(r, c);
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
  CHECK_THROWS_AS((void)fuse(out, {0.5}), NumericalError);
  CHECK_THROWS_AS((void)fuse(out, {0.6, 0.6}), NumericalError);
  CHECK_THROWS_AS((void)fuse(out, {-0.2, 1.2}), NumericalError);
}

TEST_CASE("one-hot fusion reproduces the selected teacher bit for bit") {
  const TeacherOutputs out = two_teachers();
  const PosteriorSequence only_b = fuse(out, {0.0, 1.0});
  CHECK(bit_equal(only_b.frames, out.posteriors[1].frames));
  const PosteriorSequence only_a = fuse(out, {1.0, 0.0});
  CHECK(bit_equal(only_a.frames, out.posteriors[0].frames));
}
