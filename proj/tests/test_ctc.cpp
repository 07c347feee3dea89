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
#include <vector>

#include <doctest.h>

#include "must/autodiff.hpp"
#include "must/ctc.hpp"
#include "must/errors.hpp"
#include "must/rng.hpp"
#include "must/tensor.hpp"
#include "support/oracles.hpp"

using namespace must;

namespace {

Tensor random_logits(Rng& rng, std::size_t t, std::size_t d) {
  Tensor x = Tensor::zeros({t, d});
  for (double& v : x.data) v = rng.uniform(-2.0, 2.0);
  return x;
}

}  // namespace

TEST_CASE("min_frames counts adjacent repeats") {
  CHECK(ctc::min_frames({}) == 0);
  CHECK(ctc::min_frames({0}) == 1);
  CHECK(ctc::min_frames({0, 1}) == 2);
  CHECK(ctc::min_frames({0, 0}) == 3);
  CHECK(ctc::min_frames({0, 0, 0}) == 5);
  CHECK(ctc::min_frames({0, 1, 1, 0}) == 5);
}

TEST_CASE("single frame loss is the label posterior") {
  const Tensor logits = Tensor::matrix({{0.4, -1.1, 0.7}});
  const auto p = oracle::softmax(logits);
  const ctc::CtcResult r = ctc::ctc_loss(logits, {1});
  CHECK(r.loss == doctest::Approx(-std::log(p[0][1])).epsilon(1e-12));
}

TEST_CASE("empty target scores the all-blank path") {
  Rng rng(5);
  const Tensor logits = random_logits(rng, 3, 4);
  const auto p = oracle::softmax(logits);
  const double want = -std::log(p[0][3] * p[1][3] * p[2][3]);
  CHECK(ctc::ctc_loss(logits, {}).loss == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("loss matches brute-force path enumeration") {
  Rng rng(99);
  for (std::size_t t = 1; t <= 4; ++t) {
    for (std::size_t labels = 1; labels <= 3; ++labels) {
      const Tensor logits = random_logits(rng, t, labels + 1);
      std::vector<std::vector<int>> targets{{}};
      for (int a = 0; a < static_cast<int>(labels); ++a) {
        targets.push_back({a});
        for (int b = 0; b < static_cast<int>(labels); ++b) {
          targets.push_back({a, b});
        }
      }
      for (const auto& target : targets) {
        if (ctc::min_frames(target) > t) {
          CHECK_THROWS_AS((void)ctc::ctc_loss(logits, target),
                          NumericalError);
          continue;
        }
        const double prob = oracle::ctc_path_probability(logits, target);
        const double loss = ctc::ctc_loss(logits, target).loss;
        CHECK(std::abs(loss - (-std::log(prob))) < 1e-9);
      }
    }
  }
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(41);
  const Tensor logits = random_logits(rng, 4, 3);
  const std::vector<int> target{0, 1};
  const ctc::CtcResult r = ctc::ctc_loss(logits, target);
  const auto f = [&](const std::vector<double>& x) {
    Tensor probe = logits;
    probe.data = x;
    return ctc::ctc_loss(probe, target).loss;
  };
  const std::vector<double> numeric =
      oracle::central_diff(f, logits.data, 1e-6);
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    CHECK(oracle::rel_err(r.grad.data[i], numeric[i]) < 1e-7);
  }
}

TEST_CASE("invalid targets are rejected") {
  const Tensor logits = Tensor::zeros({2, 3});
  CHECK_THROWS_AS((void)ctc::ctc_loss(logits, {0, 0}), NumericalError);
  CHECK_THROWS_AS((void)ctc::ctc_loss(logits, {2}), Error);   // blank index
  CHECK_THROWS_AS((void)ctc::ctc_loss(logits, {-1}), Error);  // out of range
}

TEST_CASE("graph ctc node forwards the loss and backpropagates") {
  Rng rng(17);
  const Tensor logits = random_logits(rng, 3, 3);
  const std::vector<int> target{1};

  ad::Graph g;
  const auto x = g.param("logits", logits);
  const auto loss = g.ctc_loss(x, target);
  const double via_graph = g.forward(loss).data[0];
  CHECK(via_graph == doctest::Approx(ctc::ctc_loss(logits, target).loss)
                         .epsilon(1e-12));

  const Tensor grad = g.backward().at("logits");
  const auto f = [&](const std::vector<double>& v) {
    Tensor probe = logits;
    probe.data = v;
    return ctc::ctc_loss(probe, target).loss;
  };
  const std::vector<double> numeric =
      oracle::central_diff(f, logits.data, 1e-6);
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    CHECK(oracle::rel_err(grad.data[i], numeric[i]) < 1e-7);
  }
}

TEST_CASE("gradient through an upstream affine layer") {
  // d loss / d W via the graph against central differences; exercises the
  // cached analytic CTC gradient being chained into earlier nodes.
  Rng rng(23);
  Tensor feats = Tensor::zeros({3, 2});
  for (double& v : feats.data) v = rng.uniform(-1.0, 1.0);
  Tensor w0 = Tensor::zeros({2, 3});
  for (double& v : w0.data) v = rng.uniform(-1.0, 1.0);
  const std::vector<int> target{0, 1};

  ad::Graph g;
  const auto f = g.constant(feats);
  const auto w = g.param("w", w0);
  const auto loss = g.ctc_loss(g.matmul(f, w), target);
  g.forward(loss);
  const Tensor grad = g.backward().at("w");

  const auto eval = [&](const std::vector<double>& x) {
    Tensor probe = w0;
    probe.data = x;
    ad::Graph h;
    const auto loss2 =
        h.ctc_loss(h.matmul(h.constant(feats), h.param("w", probe)), target);
    return h.forward(loss2).data[0];
  };
  const std::vector<double> numeric = oracle::central_diff(eval, w0.data, 1e-6);
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    CHECK(oracle::rel_err(grad.data[i], numeric[i]) < 1e-6);
  }
}
