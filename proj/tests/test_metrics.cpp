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

#include <string>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "must/errors.hpp"
#include "must/metrics.hpp"
#include "must/rng.hpp"
#include "support/oracles.hpp"

using namespace must;

TEST_CASE("edit distance matches the recursive oracle") {
  Rng rng(31);
  const char32_t alphabet[] = {U'a', U'b', U'c'};
  for (int trial = 0; trial < 300; ++trial) {
    std::u32string a, b;
    const std::size_t la = rng.uniform_index(7);
    const std::size_t lb = rng.uniform_index(7);
    for (std::size_t i = 0; i < la; ++i) a += alphabet[rng.uniform_index(3)];
    for (std::size_t i = 0; i < lb; ++i) b += alphabet[rng.uniform_index(3)];
    const EditBreakdown got = edit_distance(a, b);
    CHECK(got.distance == oracle::edit_distance_slow(a, b));
    CHECK(got.substitutions + got.deletions + got.insertions == got.distance);
  }
}

TEST_CASE("edit breakdown follows the documented conventions") {
  SUBCASE("identity") {
    const EditBreakdown b = edit_distance(U"abc", U"abc");
    CHECK(b.distance == 0);
  }
  SUBCASE("missing reference characters count as deletions") {
    const EditBreakdown b = edit_distance(U"", U"abc");
    CHECK(b.deletions == 3);
    CHECK(b.insertions == 0);
  }
  SUBCASE("extra hypothesis characters count as insertions") {
    const EditBreakdown b = edit_distance(U"abc", U"");
    CHECK(b.insertions == 3);
    CHECK(b.deletions == 0);
  }
  SUBCASE("ties prefer substitution over deletion and insertion") {
    const EditBreakdown b = edit_distance(U"ab", U"ba");
    CHECK(b.distance == 2);
    CHECK(b.substitutions == 2);
    CHECK(b.deletions == 0);
    CHECK(b.insertions == 0);
  }
  SUBCASE("classic kitten to sitting") {
    const EditBreakdown b = edit_distance(U"kitten", U"sitting");
    CHECK(b.distance == 3);
    CHECK(b.substitutions == 2);
    CHECK(b.deletions == 1);
  }
}

TEST_CASE("cer pools edits over the corpus") {
  const CerResult r = cer({U"ab", U"c"}, {U"abc", U"c"});
  CHECK(r.reference_length == 4);
  CHECK(r.substitutions + r.deletions + r.insertions == 1);
  CHECK(r.cer == doctest::Approx(0.25).epsilon(1e-12));

  CHECK_THROWS_AS((void)cer({U"a"}, {U"a", U"b"}), NumericalError);
  CHECK_THROWS_AS((void)cer({U"a"}, {U""}), NumericalError);
}

TEST_CASE("cer can exceed one when insertions dominate") {
  const CerResult r = cer({U"aaaa"}, {U"b"});
  CHECK(r.cer > 1.0);
}

TEST_CASE("csv_table renders rows, missing cells, and the average column") {
  std::map<std::pair<std::string, std::string>, double> cells;
  cells[{"r1", "c1"}] = 1.0;
  cells[{"r1", "c2"}] = 2.0;
  cells[{"r2", "c2"}] = 4.125;
  const std::string got =
      csv_table("name", {"r1", "r2"}, {"c1", "c2"}, cells, 2, true);
  CHECK(got ==
        "name,c1,c2,avg\n"
        "r1,1.00,2.00,1.50\n"
        "r2,-,4.12,4.12\n");
  const std::string no_avg =
      csv_table("name", {"r1"}, {"c1"}, cells, 1, false);
  CHECK(no_avg == "name,c1\nr1,1.0\n");
}

TEST_CASE("jsonl log carries one parsable object per utterance") {
  const std::string text = jsonl_utterance_log(
      {"u1", "u2"}, {U"ab", U"α"}, {U"ab", U"β"});
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  REQUIRE(lines.size() == 2);
  const auto first = nlohmann::json::parse(lines[0]);
  CHECK(first.at("utt_id") == "u1");
  CHECK(first.at("hyp") == "ab");
  CHECK(first.at("S") == 0);
  const auto second = nlohmann::json::parse(lines[1]);
  CHECK(second.at("hyp") == "α");
  CHECK(second.at("S") == 1);
  CHECK(second.at("D") == 0);
  CHECK(second.at("I") == 0);
}
