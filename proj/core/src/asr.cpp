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

#include "must/asr.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "must/autodiff.hpp"
#include "must/checkpoint.hpp"
#include "must/errors.hpp"
#include "must/rng.hpp"
#include "must/text.hpp"
#include "asr_detail.hpp"
#include "numeric_ops.hpp"

namespace must {

std::vector<int> Vocab::encode(const std::u32string& s) const {
  std::vector<int> out;
  out.reserve(s.size());
  for (char32_t ch : s) {
    const std::size_t pos = characters.find(ch);
    if (pos == std::u32string::npos) {
      throw ConfigError("character U+" + std::to_string(std::uint32_t(ch)) +
                        " is not in the vocabulary");
    }
    out.push_back(static_cast<int>(pos));
  }
  return out;
}

namespace {

/// Entropy-side constant of KL(p || q): sum of p * log p with 0 log 0 := 0.
double sum_p_log_p(const Tensor& p) {
  constexpr double kFloor = 1e-12;
  double s = 0.0;
  for (double v : p.data) {
    if (v > 0.0) s += v * std::log(std::max(v, kFloor));
  }
  return s;
}

Tensor uniform_init(Rng& rng, std::size_t rows, std::size_t cols,
                    std::size_t fan_in) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::zeros({rows, cols});
  for (double& v : t.data) v = rng.uniform(-s, s);
  return t;
}

AsrModel init_model(const std::string& language_id, std::size_t feature_dim,
                    const TrainHyper& hyper) {
  AsrModel m;
  m.language_id = language_id;
  m.feature_dim = feature_dim;
  m.hidden = hyper.hidden;
  m.vocab = hyper.vocab;
  const std::size_t f = feature_dim;
  const std::size_t h = hyper.hidden;
  const std::size_t d = m.vocab.dim();
  Rng rng(hyper.seed);
  // Creation order is fixed; every shape's fan-in is its input dimension
  // (biases use their layer's input dimension).
  auto put = [&](const std::string& name, std::size_t rows, std::size_t cols,
                 std::size_t fan_in) {
    m.params[name] = uniform_init(rng, rows, cols, fan_in);
  };
  put("enc_fwd_wx", f, h, f);
  put("enc_fwd_wh", h, h, h);
  put("enc_fwd_b", 1, h, f);
  put("enc_bwd_wx", f, h, f);
  put("enc_bwd_wh", h, h, h);
  put("enc_bwd_b", 1, h, f);
  put("ctc_w", 2 * h, d, 2 * h);
  put("ctc_b", 1, d, 2 * h);
  put("dec_wx", d + 2 * h, 2 * h, d + 2 * h);
  put("dec_wh", 2 * h, 2 * h, 2 * h);
  put("dec_b", 1, 2 * h, d + 2 * h);
  put("out_w", 4 * h, d, 4 * h);
  put("out_b", 1, d, 4 * h);
  return m;
}

Tensor one_hot(std::size_t dim, std::size_t index) {
  Tensor t = Tensor::zeros({1, dim});
  t.at(0, index) = 1.0;
  return t;
}

}  // namespace

namespace detail {

LossGraph build_loss_graph(const AsrModel& model, const Tensor& feats,
                           const std::vector<int>& targets, double alpha,
                           double lambda,
                           const std::vector<std::pair<double, Tensor>>& soft) {
  LossGraph lg;
  ad::Graph& g = lg.g;
  for (const auto& [name, value] : model.params) {
    lg.param_ids[name] = g.param(name, value);
  }
  auto p = [&](const char* name) { return lg.param_ids.at(name); };
  const std::size_t t_len = feats.rows();
  const std::size_t h = model.hidden;
  const std::size_t d = model.output_dim();
  const std::size_t blank = model.vocab.blank_index();

  const ad::NodeId feats_id = g.constant(feats);
  const ad::NodeId zero_h = g.constant(Tensor::zeros({1, h}));

  std::vector<ad::NodeId> fwd(t_len), bwd(t_len);
  ad::NodeId prev = zero_h;
  for (std::size_t t = 0; t < t_len; ++t) {
    const ad::NodeId x = g.row(feats_id, t);
    prev = g.tanh(g.add(g.add(g.matmul(x, p("enc_fwd_wx")),
                              g.matmul(prev, p("enc_fwd_wh"))),
                        p("enc_fwd_b")));
    fwd[t] = prev;
  }
  prev = zero_h;
  for (std::size_t t = t_len; t-- > 0;) {
    const ad::NodeId x = g.row(feats_id, t);
    prev = g.tanh(g.add(g.add(g.matmul(x, p("enc_bwd_wx")),
                              g.matmul(prev, p("enc_bwd_wh"))),
                        p("enc_bwd_b")));
    bwd[t] = prev;
  }
  std::vector<ad::NodeId> enc_rows(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    enc_rows[t] = g.concat_cols(fwd[t], bwd[t]);
  }
  const ad::NodeId enc = g.stack_rows(enc_rows);
  const ad::NodeId ctc_logits =
      g.add_row_vec(g.matmul(enc, p("ctc_w")), p("ctc_b"));
  lg.l_ctc = g.ctc_loss(ctc_logits, targets);

  if (!soft.empty()) {
    const ad::NodeId student_ls = g.log_softmax_rows(ctc_logits);
    ad::NodeId acc = 0;
    for (std::size_t k = 0; k < soft.size(); ++k) {
      const auto& [weight, teacher] = soft[k];
      const ad::NodeId teacher_id = g.constant(teacher);
      const ad::NodeId cross = g.sum_all(g.mul(teacher_id, student_ls));
      const ad::NodeId ref = g.constant(Tensor::scalar(sum_p_log_p(teacher)));
      const ad::NodeId kd_k = g.scalar_mul(
          g.sub(ref, cross), 1.0 / static_cast<double>(t_len));
      const ad::NodeId weighted = g.scalar_mul(kd_k, weight);
      acc = (k == 0) ? weighted : g.add(acc, weighted);
    }
    lg.l_kd = acc;
    lg.has_kd = true;
  }

  // Teacher-forced decoder: inputs are blank (start), y_1 .. y_L; the
  // prediction targets are y_1 .. y_L, blank (end).
  const ad::NodeId enc_t = g.transpose(enc);
  ad::NodeId s_prev = g.constant(Tensor::zeros({1, 2 * h}));
  ad::NodeId c_prev = g.constant(Tensor::zeros({1, 2 * h}));
  ad::NodeId ce_acc = 0;
  for (std::size_t j = 0; j <= targets.size(); ++j) {
    const std::size_t prev_tok =
        (j == 0) ? blank : static_cast<std::size_t>(targets[j - 1]);
    const std::size_t want =
        (j == targets.size()) ? blank : static_cast<std::size_t>(targets[j]);
    const ad::NodeId u =
        g.concat_cols(g.constant(one_hot(d, prev_tok)), c_prev);
    const ad::NodeId s = g.tanh(g.add(
        g.add(g.matmul(u, p("dec_wx")), g.matmul(s_prev, p("dec_wh"))),
        p("dec_b")));
    const ad::NodeId attn = g.softmax_rows(g.matmul(s, enc_t));
    const ad::NodeId ctx = g.matmul(attn, enc);
    const ad::NodeId logits =
        g.add(g.matmul(g.concat_cols(s, ctx), p("out_w")), p("out_b"));
    const ad::NodeId lp = g.log_softmax_rows(logits);
    const ad::NodeId pick = g.sum_all(g.mul(lp, g.constant(one_hot(d, want))));
    ce_acc = (j == 0) ? pick : g.add(ce_acc, pick);
    s_prev = s;
    c_prev = ctx;
  }
  lg.l_ce = g.scalar_mul(ce_acc, -1.0);

  if (lg.has_kd) {
    lg.total = g.add(
        g.scalar_mul(lg.l_ctc, alpha),
        g.scalar_mul(g.add(g.scalar_mul(lg.l_kd, lambda),
                           g.scalar_mul(lg.l_ce, 1.0 - lambda)),
                     1.0 - alpha));
  } else {
    lg.total =
        g.add(g.scalar_mul(lg.l_ctc, alpha), g.scalar_mul(lg.l_ce, 1.0 - alpha));
  }
  return lg;
}

}  // namespace detail

namespace {

void sgd_step(AsrModel& model, const std::map<std::string, Tensor>& grads,
              double lr, double clip_norm) {
  double sq = 0.0;
  for (const auto& [name, grad] : grads) {
    for (double v : grad.data) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  const double scale = (norm > clip_norm) ? clip_norm / norm : 1.0;
  for (auto& [name, value] : model.params) {
    const Tensor& grad = grads.at(name);
    for (std::size_t i = 0; i < value.data.size(); ++i) {
      value.data[i] -= lr * scale * grad.data[i];
    }
  }
}

void check_hyper(const TrainHyper& hyper) {
  if (!(hyper.alpha >= 0.0 && hyper.alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0,1]");
  }
  if (!(hyper.lambda >= 0.0 && hyper.lambda <= 1.0)) {
    throw ConfigError("lambda must lie in [0,1]");
  }
  if (hyper.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(hyper.lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (hyper.hidden < 1) throw ConfigError("hidden size must be >= 1");
  if (!(hyper.clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
  if (hyper.vocab.characters.empty()) {
    throw ConfigError("vocabulary must not be empty");
  }
}

}  // namespace

AsrModel train_asr_loop(const std::vector<Utterance>& corpus,
                        const TrainHyper& hyper, const SoftLabelFn& soft_labels,
                        std::vector<BatchLogRow>* log) {
  check_hyper(hyper);
  if (corpus.empty()) throw ConfigError("training corpus is empty");
  const std::string& lang = corpus.front().language_id;
  for (const Utterance& u : corpus) {
    if (u.language_id != lang) {
      throw ConfigError("training corpus mixes languages '" + lang + "' and '" +
                        u.language_id + "'");
    }
  }
  AsrModel model = init_model(lang, corpus.front().features.cols(), hyper);
  Rng rng(derive_seed(hyper.seed, {"order", lang}));

  const bool distilling = static_cast<bool>(soft_labels) && hyper.lambda > 0.0;
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < order.size(); ++b) {
      const Utterance& utt = corpus[order[b]];
      if (utt.features.cols() != model.feature_dim) {
        throw NumericalError("utterance '" + utt.utt_id + "' has " +
                             std::to_string(utt.features.cols()) +
                             " feature dims, model expects " +
                             std::to_string(model.feature_dim));
      }
      const std::vector<int> targets = model.vocab.encode(utt.transcript);
      std::vector<std::pair<double, Tensor>> soft;
      if (distilling) {
        soft = soft_labels(utt);
        if (soft.empty()) {
          throw NumericalError("soft-label source returned no teachers for '" +
                               utt.utt_id + "'");
        }
      }
      detail::LossGraph lg = detail::build_loss_graph(
          model, utt.features, targets, hyper.alpha, hyper.lambda, soft);
      lg.g.forward(lg.total);
      if (log) {
        BatchLogRow row;
        row.epoch = epoch;
        row.batch = b;
        row.utt_id = utt.utt_id;
        row.l_ctc = lg.g.value(lg.l_ctc).data[0];
        row.l_ce = lg.g.value(lg.l_ce).data[0];
        row.l_kd = lg.has_kd ? lg.g.value(lg.l_kd).data[0] : 0.0;
        row.total = lg.g.value(lg.total).data[0];
        for (const auto& [w, teacher] : soft) row.teacher_weights.push_back(w);
        log->push_back(std::move(row));
      }
      const auto grads = lg.g.backward();
      sgd_step(model, grads, hyper.lr, hyper.clip_norm);
    }
  }
  return model;
}

AsrModel train_asr(const std::vector<Utterance>& corpus, const TrainHyper& hyper,
                   std::vector<BatchLogRow>* log) {
  TrainHyper mono = hyper;
  mono.lambda = 0.0;
  return train_asr_loop(corpus, mono, nullptr, log);
}

namespace detail {

EncoderOut run_encoder(const AsrModel& model, const Tensor& feats) {
  if (feats.cols() != model.feature_dim) {
    throw NumericalError("feature dimension " + std::to_string(feats.cols()) +
                         " does not match the model's " +
                         std::to_string(model.feature_dim));
  }
  const auto& p = model.params;
  EncoderOut out;
  out.states = num::bidir_rnn(feats, p.at("enc_fwd_wx"), p.at("enc_fwd_wh"),
                              p.at("enc_fwd_b"), p.at("enc_bwd_wx"),
                              p.at("enc_bwd_wh"), p.at("enc_bwd_b"));
  out.ctc_logits =
      num::add_row_vec(num::matmul(out.states, p.at("ctc_w")), p.at("ctc_b"));
  return out;
}

DecoderState initial_decoder_state(const AsrModel& model) {
  DecoderState st;
  st.s = Tensor::zeros({1, 2 * model.hidden});
  st.c = Tensor::zeros({1, 2 * model.hidden});
  return st;
}

std::pair<DecoderState, Tensor> decoder_step(const AsrModel& model,
                                             const Tensor& enc_states,
                                             const DecoderState& prev,
                                             int prev_token) {
  const auto& p = model.params;
  const std::size_t d = model.output_dim();
  const Tensor u = num::concat_cols(
      one_hot(d, static_cast<std::size_t>(prev_token)), prev.c);
  const Tensor s = num::rnn_step(u, prev.s, p.at("dec_wx"), p.at("dec_wh"),
                                 p.at("dec_b"));
  const Tensor scores = num::matmul(s, num::transpose(enc_states));
  const Tensor attn = num::softmax_rows(scores);
  const Tensor ctx = num::matmul(attn, enc_states);
  const Tensor logits = num::add(
      num::matmul(num::concat_cols(s, ctx), p.at("out_w")), p.at("out_b"));
  DecoderState next{s, ctx};
  return {std::move(next), num::softmax_rows(logits, /*log_domain=*/true)};
}

}  // namespace detail

PosteriorSequence frame_posteriors(const AsrModel& model, const Utterance& utt) {
  const detail::EncoderOut enc = detail::run_encoder(model, utt.features);
  PosteriorSequence out;
  out.frames = num::softmax_rows(enc.ctc_logits);
  out.language_id = model.language_id;
  return out;
}

void save_asr_model(const AsrModel& model, const std::string& path) {
  save_checkpoint(path, model.params);
  nlohmann::json meta;
  meta["kind"] = "asr";
  meta["language_id"] = model.language_id;
  meta["feature_dim"] = model.feature_dim;
  meta["hidden"] = model.hidden;
  meta["vocab"] = utf8_encode(model.vocab.characters);
  meta["dim"] = model.output_dim();
  std::ofstream out(path + ".json", std::ios::trunc);
  if (!out) throw Error("cannot write model metadata: " + path + ".json");
  out << meta.dump(2) << "\n";
}

AsrModel load_asr_model(const std::string& path) {
  std::ifstream in(path + ".json");
  if (!in) throw Error("cannot open model metadata: " + path + ".json");
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed model metadata " + path + ".json: " + e.what());
  }
  AsrModel m;
  try {
    if (meta.at("kind").get<std::string>() != "asr") {
      throw Error("not an ASR model: " + path);
    }
    m.language_id = meta.at("language_id").get<std::string>();
    m.feature_dim = meta.at("feature_dim").get<std::size_t>();
    m.hidden = meta.at("hidden").get<std::size_t>();
    m.vocab.characters = utf8_decode(meta.at("vocab").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error("incomplete model metadata " + path + ".json: " + e.what());
  }
  m.params = load_checkpoint(path);
  return m;
}

}  // namespace must
