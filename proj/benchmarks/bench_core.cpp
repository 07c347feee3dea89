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

// Microbenchmarks for the numeric hot paths: the CTC recursion, autodiff
// forward/backward over a training-sized graph, encoder inference, fusion,
// and the edit-distance kernel that dominates evaluation.

#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "must/asr.hpp"
#include "must/autodiff.hpp"
#include "must/ctc.hpp"
#include "must/ensemble.hpp"
#include "must/metrics.hpp"
#include "must/posteriors.hpp"
#include "must/rng.hpp"
#include "must/synth.hpp"
#include "must/tensor.hpp"

namespace {

using namespace must;

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c) {
  Tensor t = Tensor::zeros({r, c});
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

Tensor random_posteriors(Rng& rng, std::size_t r, std::size_t c) {
  Tensor t = Tensor::zeros({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      t.at(i, j) = rng.uniform(0.01, 1.0);
      z += t.at(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) t.at(i, j) /= z;
  }
  return t;
}

/// A trained toy recognizer, built once and shared across benchmarks.
const AsrModel& toy_model() {
  static const AsrModel model = [] {
    FamilyConfig fam;
    fam.language_ids = {"ba", "bb"};
    fam.overlap = {{1.0, 0.5}, {0.5, 1.0}};
    fam.inventory_size = 8;
    fam.feature_dim = 8;
    fam.seed = 7;
    const std::vector<LanguageSpec> specs = generate_family(fam);
    std::vector<Utterance> corpus;
    for (int i = 0; i < 4; ++i) {
      corpus.push_back(
          synthesize_utterance(specs[0], 4, 100 + i, "u" + std::to_string(i)));
    }
    TrainHyper h;
    h.epochs = 1;
    h.hidden = 24;
    h.seed = 3;
    h.vocab = Vocab{specs[0].character_set};
    return train_asr(corpus, h);
  }();
  return model;
}

void BM_CtcLoss(benchmark::State& state) {
  const std::size_t t_len = static_cast<std::size_t>(state.range(0));
  Rng rng(11);
  const Tensor logits = random_tensor(rng, t_len, 30);
  std::vector<int> targets;
  for (std::size_t i = 0; i * 4 + 3 < t_len; ++i) {
    targets.push_back(static_cast<int>(i % 29));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(ctc::ctc_loss(logits, targets).loss);
  }
}
BENCHMARK(BM_CtcLoss)->Arg(32)->Arg(128);

void BM_GraphForwardBackward(benchmark::State& state) {
  Rng rng(13);
  ad::Graph g;
  const auto x = g.constant(random_tensor(rng, 32, 16));
  const auto w1 = g.param("w1", random_tensor(rng, 16, 32));
  const auto b1 = g.param("b1", random_tensor(rng, 1, 32));
  const auto w2 = g.param("w2", random_tensor(rng, 32, 12));
  const auto b2 = g.param("b2", random_tensor(rng, 1, 12));
  const auto hidden = g.tanh(g.add_row_vec(g.matmul(x, w1), b1));
  const auto logits = g.add_row_vec(g.matmul(hidden, w2), b2);
  const auto loss = g.ctc_loss(logits, {0, 1, 2, 3, 4, 5});
  for (auto _ : state) {
    g.forward(loss);
    benchmark::DoNotOptimize(g.backward());
  }
}
BENCHMARK(BM_GraphForwardBackward);

void BM_FramePosteriors(benchmark::State& state) {
  const AsrModel& model = toy_model();
  Rng rng(17);
  Utterance utt;
  utt.utt_id = "bench";
  utt.language_id = model.language_id;
  utt.features = random_tensor(rng, 64, model.feature_dim);
  for (auto _ : state) {
    benchmark::DoNotOptimize(frame_posteriors(model, utt).frames.data);
  }
}
BENCHMARK(BM_FramePosteriors);

void BM_GreedyDecode(benchmark::State& state) {
  const AsrModel& model = toy_model();
  Rng rng(19);
  PosteriorSequence posts;
  posts.language_id = model.language_id;
  posts.frames = random_posteriors(rng, 128, model.output_dim());
  for (auto _ : state) {
    benchmark::DoNotOptimize(greedy_ctc_decode(posts, model.vocab));
  }
}
BENCHMARK(BM_GreedyDecode);

void BM_FusePosteriors(benchmark::State& state) {
  Rng rng(23);
  TeacherOutputs outs;
  for (int k = 0; k < 4; ++k) {
    outs.teacher_ids.push_back("t" + std::to_string(k));
    PosteriorSequence p;
    p.language_id = "tgt";
    p.frames = random_posteriors(rng, 100, 30);
    outs.posteriors.push_back(p);
  }
  const std::vector<double> weights{0.4, 0.3, 0.2, 0.1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(fuse(outs, weights).frames.data);
  }
}
BENCHMARK(BM_FusePosteriors);

void BM_EditDistance(benchmark::State& state) {
  const std::size_t len = static_cast<std::size_t>(state.range(0));
  Rng rng(29);
  std::u32string a, b;
  for (std::size_t i = 0; i < len; ++i) {
    a.push_back(static_cast<char32_t>(U'a' + rng.uniform_index(20)));
    b.push_back(static_cast<char32_t>(U'a' + rng.uniform_index(20)));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(edit_distance(a, b).distance);
  }
}
BENCHMARK(BM_EditDistance)->Arg(16)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
