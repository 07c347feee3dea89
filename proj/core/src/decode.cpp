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

#include <algorithm>
#include <cmath>
#include <limits>

#include "must/asr.hpp"
#include "must/errors.hpp"
#include "asr_detail.hpp"
#include "numeric_ops.hpp"

namespace must {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

/// A live beam-search hypothesis. The r_n/r_b arrays hold the log
/// probability of the label prefix at each frame boundary, split by
/// whether the last emitted symbol was the label itself or a blank.
struct Hyp {
  std::u32string chars;
  int last_label = -1;  // -1 while empty
  std::vector<double> rn, rb;
  detail::DecoderState att;
  double att_score = 0.0;
  double ctc_score = 0.0;  // log prefix probability
  int prev_token = 0;      // decoder conditioning token (blank at start)
};

struct Finished {
  std::u32string chars;
  double score = 0.0;
};

bool better(const Finished& a, const Finished& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.chars < b.chars;
}

}  // namespace

std::u32string greedy_ctc_decode(const PosteriorSequence& posts,
                                 const Vocab& vocab) {
  if (posts.dim() != vocab.dim()) {
    throw NumericalError("posterior dimension " + std::to_string(posts.dim()) +
                         " does not match the vocabulary's " +
                         std::to_string(vocab.dim()));
  }
  const std::size_t blank = vocab.blank_index();
  std::u32string out;
  std::size_t prev = blank;
  for (std::size_t t = 0; t < posts.length(); ++t) {
    const std::size_t k = argmax_row(posts.frames, t);
    if (k != blank && k != prev) out.push_back(vocab.characters[k]);
    prev = k;
  }
  return out;
}

std::u32string decode(const AsrModel& model, const Utterance& utt, double gamma,
                      std::size_t beam_size) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ConfigError("gamma must lie in [0,1]");
  }
  if (beam_size < 1) throw ConfigError("beam size must be >= 1");
  // The pure-CTC criterion degenerates to greedy collapse of the frame
  // posteriors; no decoder pass is needed.
  if (gamma == 1.0) {
    return greedy_ctc_decode(frame_posteriors(model, utt), model.vocab);
  }

  const detail::EncoderOut enc = detail::run_encoder(model, utt.features);
  const Tensor ly = num::softmax_rows(enc.ctc_logits, /*log_domain=*/true);
  const std::size_t t_len = ly.rows();
  const int blank = static_cast<int>(model.vocab.blank_index());
  const std::size_t cap = 2 * t_len;

  Hyp root;
  root.rn.assign(t_len + 1, kNegInf);
  root.rb.assign(t_len + 1, kNegInf);
  root.rb[0] = 0.0;
  for (std::size_t t = 1; t <= t_len; ++t) {
    root.rb[t] = root.rb[t - 1] + ly.at(t - 1, static_cast<std::size_t>(blank));
  }
  root.att = detail::initial_decoder_state(model);
  root.prev_token = blank;

  std::vector<Hyp> live{std::move(root)};
  std::vector<Finished> finished;

  for (std::size_t step = 0; step < cap && !live.empty(); ++step) {
    std::vector<Hyp> candidates;
    for (Hyp& hyp : live) {
      auto [state, lp] = detail::decoder_step(model, enc.states, hyp.att,
                                              hyp.prev_token);
      // Ending here scores the complete labelling under CTC; the blank
      // output doubles as the decoder's end symbol.
      const double ctc_complete = log_add(hyp.rn[t_len], hyp.rb[t_len]);
      const double att_end =
          hyp.att_score + lp.at(0, static_cast<std::size_t>(blank));
      finished.push_back(
          {hyp.chars, gamma * ctc_complete + (1.0 - gamma) * att_end});

      for (int c = 0; c < blank; ++c) {
        Hyp next;
        next.chars = hyp.chars;
        next.chars.push_back(model.vocab.characters[static_cast<std::size_t>(c)]);
        next.last_label = c;
        next.rn.assign(t_len + 1, kNegInf);
        next.rb.assign(t_len + 1, kNegInf);
        double psi = kNegInf;
        for (std::size_t t = 1; t <= t_len; ++t) {
          const double phi = (hyp.last_label == c)
                                 ? hyp.rb[t - 1]
                                 : log_add(hyp.rb[t - 1], hyp.rn[t - 1]);
          const double pc = ly.at(t - 1, static_cast<std::size_t>(c));
          next.rn[t] = log_add(next.rn[t - 1], phi) + pc;
          next.rb[t] = log_add(next.rb[t - 1], next.rn[t - 1]) +
                       ly.at(t - 1, static_cast<std::size_t>(blank));
          psi = log_add(psi, phi + pc);
        }
        next.ctc_score = psi;
        next.att = state;
        next.att_score = hyp.att_score + lp.at(0, static_cast<std::size_t>(c));
        next.prev_token = c;
        candidates.push_back(std::move(next));
      }
    }
    const auto rank = [gamma](const Hyp& h) {
      return gamma * h.ctc_score + (1.0 - gamma) * h.att_score;
    };
    std::sort(candidates.begin(), candidates.end(),
              [&](const Hyp& a, const Hyp& b) {
                const double sa = rank(a);
                const double sb = rank(b);
                if (sa != sb) return sa > sb;
                return a.chars < b.chars;
              });
    if (candidates.size() > beam_size) candidates.resize(beam_size);
    live = std::move(candidates);
  }
  // Hypotheses still alive at the length cap are closed off as they stand.
  for (Hyp& hyp : live) {
    auto [state, lp] = detail::decoder_step(model, enc.states, hyp.att,
                                            hyp.prev_token);
    (void)state;
    const double ctc_complete = log_add(hyp.rn[t_len], hyp.rb[t_len]);
    const double att_end =
        hyp.att_score + lp.at(0, static_cast<std::size_t>(blank));
    finished.push_back(
        {hyp.chars, gamma * ctc_complete + (1.0 - gamma) * att_end});
  }

  const Finished* best = &finished.front();
  for (const Finished& f : finished) {
    if (better(f, *best)) best = &f;
  }
  return best->chars;
}

}  // namespace must
