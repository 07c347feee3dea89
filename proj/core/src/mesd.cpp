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

#include "must/mesd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "must/autodiff.hpp"
#include "must/checkpoint.hpp"
#include "must/errors.hpp"
#include "must/rng.hpp"
#include "numeric_ops.hpp"

namespace must {

double kl_frame_loss(const PosteriorSequence& target,
                     const PosteriorSequence& mapped) {
  validate_posteriors(target);
  validate_posteriors(mapped);
  if (target.length() != mapped.length()) {
    throw NumericalError("kl_frame_loss: sequence lengths differ (" +
                         std::to_string(target.length()) + " vs " +
                         std::to_string(mapped.length()) + ")");
  }
  if (target.dim() != mapped.dim()) {
    throw NumericalError("kl_frame_loss: distribution dimensions differ (" +
                         std::to_string(target.dim()) + " vs " +
                         std::to_string(mapped.dim()) + ")");
  }
  return kl_frames(target.frames, mapped.frames);
}

std::vector<double> rank_sum_weights(const std::vector<double>& losses) {
  if (losses.empty()) throw ConfigError("rank_sum_weights: no losses given");
  const std::size_t k = losses.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Stable sort keeps equal losses in index order, so ties take the
  // better (smaller) rank at the earlier index.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return losses[a] > losses[b];
                   });
  std::vector<double> weights(k, 0.0);
  const double denom = static_cast<double>(k) * static_cast<double>(k + 1);
  for (std::size_t pos = 0; pos < k; ++pos) {
    const double rank = static_cast<double>(pos + 1);
    weights[order[pos]] = 2.0 * (static_cast<double>(k + 1) - rank) / denom;
  }
  return weights;
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

std::vector<std::string> encoder_param_names(const std::string& lang) {
  const std::string base = "enc_" + lang + "_";
  return {base + "fwd_wx", base + "fwd_wh", base + "fwd_b",
          base + "bwd_wx", base + "bwd_wh", base + "bwd_b",
          base + "proj_w", base + "proj_b"};
}

std::vector<std::string> expected_param_names(const MesdModel& m) {
  std::vector<std::string> names;
  for (const std::string& lang : m.source_languages) {
    for (std::string& n : encoder_param_names(lang)) names.push_back(std::move(n));
  }
  for (const char* n : {"dec_fwd_wx", "dec_fwd_wh", "dec_fwd_b", "dec_bwd_wx",
                        "dec_bwd_wh", "dec_bwd_b", "out_w", "out_b"}) {
    names.emplace_back(n);
  }
  return names;
}

Tensor uniform_init(Rng& rng, std::size_t rows, std::size_t cols,
                    std::size_t fan_in) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::zeros({rows, cols});
  for (double& v : t.data) v = rng.uniform(-s, s);
  return t;
}

MesdModel init_model(const AsrModel& target_asr,
                     const std::vector<AsrModel>& source_asrs,
                     const MesdHyper& hyper) {
  MesdModel m;
  m.target_language = target_asr.language_id;
  m.hidden = hyper.hidden;
  m.output_dim = target_asr.output_dim();
  const std::size_t h = m.hidden;
  Rng rng(derive_seed(hyper.seed, {"mesd", "init"}));
  auto put = [&](const std::string& name, std::size_t rows, std::size_t cols,
                 std::size_t fan_in) {
    m.params[name] = uniform_init(rng, rows, cols, fan_in);
  };
  for (const AsrModel& src : source_asrs) {
    const std::string& lang = src.language_id;
    m.source_languages.push_back(lang);
    const std::size_t ds = src.output_dim();
    m.input_dims[lang] = ds;
    const std::string base = "enc_" + lang + "_";
    put(base + "fwd_wx", ds, h, ds);
    put(base + "fwd_wh", h, h, h);
    put(base + "fwd_b", 1, h, ds);
    put(base + "bwd_wx", ds, h, ds);
    put(base + "bwd_wh", h, h, h);
    put(base + "bwd_b", 1, h, ds);
    put(base + "proj_w", 2 * h, h, 2 * h);
    put(base + "proj_b", 1, h, 2 * h);
  }
  put("dec_fwd_wx", h, h, h);
  put("dec_fwd_wh", h, h, h);
  put("dec_fwd_b", 1, h, h);
  put("dec_bwd_wx", h, h, h);
  put("dec_bwd_wh", h, h, h);
  put("dec_bwd_b", 1, h, h);
  put("out_w", 2 * h, m.output_dim, 2 * h);
  put("out_b", 1, m.output_dim, 2 * h);
  return m;
}

/// Unrolls a bidirectional tanh recurrence over the rows of `xs` on the
/// tape; mirrors num::bidir_rnn.
ad::NodeId graph_bidir_rnn(ad::Graph& g,
                           const std::map<std::string, ad::NodeId>& params,
                           ad::NodeId xs, std::size_t t_len,
                           std::size_t hidden, const std::string& prefix) {
  auto p = [&](const std::string& suffix) {
    return params.at(prefix + suffix);
  };
  const ad::NodeId zero_h = g.constant(Tensor::zeros({1, hidden}));
  std::vector<ad::NodeId> fwd(t_len), bwd(t_len);
  ad::NodeId prev = zero_h;
  for (std::size_t t = 0; t < t_len; ++t) {
    const ad::NodeId x = g.row(xs, t);
    prev = g.tanh(g.add(
        g.add(g.matmul(x, p("fwd_wx")), g.matmul(prev, p("fwd_wh"))),
        p("fwd_b")));
    fwd[t] = prev;
  }
  prev = zero_h;
  for (std::size_t t = t_len; t-- > 0;) {
    const ad::NodeId x = g.row(xs, t);
    prev = g.tanh(g.add(
        g.add(g.matmul(x, p("bwd_wx")), g.matmul(prev, p("bwd_wh"))),
        p("bwd_b")));
    bwd[t] = prev;
  }
  std::vector<ad::NodeId> rows(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    rows[t] = g.concat_cols(fwd[t], bwd[t]);
  }
  return g.stack_rows(rows);
}

void check_hyper(const MesdHyper& hyper) {
  if (hyper.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(hyper.lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (hyper.hidden < 1) throw ConfigError("hidden size must be >= 1");
  if (!(hyper.clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
}

void sgd_step(MesdModel& model, const std::map<std::string, Tensor>& grads,
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

}  // namespace

PosteriorSequence map_posteriors(const MesdModel& model,
                                 const std::string& source_language,
                                 const PosteriorSequence& source_posts) {
  const auto dim_it = model.input_dims.find(source_language);
  if (dim_it == model.input_dims.end()) {
    throw ConfigError("mapping model has no encoder for language '" +
                      source_language + "'");
  }
  if (source_posts.language_id != source_language) {
    throw ConfigError("posteriors are tagged '" + source_posts.language_id +
                      "', expected '" + source_language + "'");
  }
  validate_posteriors(source_posts);
  if (source_posts.dim() != dim_it->second) {
    throw NumericalError("posterior dimension " +
                         std::to_string(source_posts.dim()) +
                         " does not match the '" + source_language +
                         "' encoder's " + std::to_string(dim_it->second));
  }
  const auto& p = model.params;
  const std::string base = "enc_" + source_language + "_";
  const Tensor enc = num::bidir_rnn(
      source_posts.frames, p.at(base + "fwd_wx"), p.at(base + "fwd_wh"),
      p.at(base + "fwd_b"), p.at(base + "bwd_wx"), p.at(base + "bwd_wh"),
      p.at(base + "bwd_b"));
  const Tensor proj = num::tanh(num::add_row_vec(
      num::matmul(enc, p.at(base + "proj_w")), p.at(base + "proj_b")));
  const Tensor dec = num::bidir_rnn(proj, p.at("dec_fwd_wx"),
                                    p.at("dec_fwd_wh"), p.at("dec_fwd_b"),
                                    p.at("dec_bwd_wx"), p.at("dec_bwd_wh"),
                                    p.at("dec_bwd_b"));
  const Tensor logits =
      num::add_row_vec(num::matmul(dec, p.at("out_w")), p.at("out_b"));
  PosteriorSequence out;
  out.frames = num::softmax_rows(logits);
  out.language_id = model.target_language;
  return out;
}

MesdModel train_mesd(const AsrModel& target_asr,
                     const std::vector<AsrModel>& source_asrs,
                     const std::vector<Utterance>& corpus,
                     const MesdHyper& hyper,
                     std::vector<MesdLogRow>* log) {
  check_hyper(hyper);
  if (source_asrs.empty()) {
    throw ConfigError("train_mesd: at least one source model is required");
  }
  std::set<std::string> seen;
  for (const AsrModel& src : source_asrs) {
    if (src.language_id == target_asr.language_id) {
      throw ConfigError("source model '" + src.language_id +
                        "' coincides with the target language");
    }
    if (!seen.insert(src.language_id).second) {
      throw ConfigError("duplicate source model for language '" +
                        src.language_id + "'");
    }
  }
  if (corpus.empty()) throw ConfigError("train_mesd: mapping corpus is empty");
  for (const Utterance& u : corpus) {
    if (u.language_id != target_asr.language_id) {
      throw ConfigError("mapping corpus utterance '" + u.utt_id +
                        "' is in language '" + u.language_id +
                        "', expected '" + target_asr.language_id + "'");
    }
  }

  MesdModel model = init_model(target_asr, source_asrs, hyper);
  const std::size_t k = source_asrs.size();

  // The posterior decoders are frozen, so their outputs per utterance are
  // fixed; decode everything once up front.
  std::vector<Tensor> tgt_frames(corpus.size());
  std::vector<double> tgt_plogp(corpus.size());
  std::vector<std::vector<Tensor>> src_frames(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    tgt_frames[i] = frame_posteriors(target_asr, corpus[i]).frames;
    tgt_plogp[i] = sum_p_log_p(tgt_frames[i]);
    src_frames[i].reserve(k);
    for (const AsrModel& src : source_asrs) {
      src_frames[i].push_back(frame_posteriors(src, corpus[i]).frames);
    }
  }

  Rng order_rng(derive_seed(hyper.seed, {"mesd", "order"}));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t b = 0; b < order.size(); ++b) {
      const std::size_t i = order[b];
      const std::size_t t_len = tgt_frames[i].rows();

      ad::Graph g;
      std::map<std::string, ad::NodeId> param_ids;
      for (const auto& [name, value] : model.params) {
        param_ids[name] = g.param(name, value);
      }
      const ad::NodeId tgt_const = g.constant(tgt_frames[i]);
      const ad::NodeId ref = g.constant(Tensor::scalar(tgt_plogp[i]));
      std::vector<ad::NodeId> pair_losses(k);
      for (std::size_t s = 0; s < k; ++s) {
        const std::string& lang = model.source_languages[s];
        const ad::NodeId src_const = g.constant(src_frames[i][s]);
        const ad::NodeId enc = graph_bidir_rnn(g, param_ids, src_const, t_len,
                                               model.hidden,
                                               "enc_" + lang + "_");
        const std::string base = "enc_" + lang + "_";
        const ad::NodeId proj = g.tanh(
            g.add_row_vec(g.matmul(enc, param_ids.at(base + "proj_w")),
                          param_ids.at(base + "proj_b")));
        const ad::NodeId dec = graph_bidir_rnn(g, param_ids, proj, t_len,
                                               model.hidden, "dec_");
        const ad::NodeId logits =
            g.add_row_vec(g.matmul(dec, param_ids.at("out_w")),
                          param_ids.at("out_b"));
        const ad::NodeId lsm = g.log_softmax_rows(logits);
        const ad::NodeId cross = g.sum_all(g.mul(tgt_const, lsm));
        pair_losses[s] = g.scalar_mul(g.sub(ref, cross),
                                      1.0 / static_cast<double>(t_len));
      }
      const ad::NodeId stacked = g.stack_rows(pair_losses);
      g.forward(stacked);

      std::vector<double> losses(k);
      for (std::size_t s = 0; s < k; ++s) {
        losses[s] = g.value(pair_losses[s]).data[0];
      }
      std::vector<double> weights;
      if (hyper.rank_weighting) {
        weights = rank_sum_weights(losses);
      } else {
        weights.assign(k, 1.0 / static_cast<double>(k));
      }

      // One backward pass seeded with the weight column equals the
      // gradient of the weighted sum of pair losses.
      Tensor seed = Tensor::zeros({k, 1});
      for (std::size_t s = 0; s < k; ++s) seed.at(s, 0) = weights[s];
      const auto grads = g.backward(seed);

      if (log) {
        MesdLogRow row;
        row.epoch = epoch;
        row.batch = b;
        row.utt_id = corpus[i].utt_id;
        row.pair_losses = losses;
        row.weights = weights;
        for (std::size_t s = 0; s < k; ++s) {
          row.combined += weights[s] * losses[s];
        }
        log->push_back(std::move(row));
      }
      sgd_step(model, grads, hyper.lr, hyper.clip_norm);
    }
  }
  return model;
}

MappingAccuracy mapping_accuracy(const MesdModel& model,
                                 const std::string& source_language,
                                 const AsrModel& target_asr,
                                 const AsrModel& source_asr,
                                 const std::vector<Utterance>& corpus) {
  if (source_asr.language_id != source_language) {
    throw ConfigError("source model is for '" + source_asr.language_id +
                      "', expected '" + source_language + "'");
  }
  if (corpus.empty()) {
    throw ConfigError("mapping_accuracy: evaluation corpus is empty");
  }
  MappingAccuracy acc;
  for (const Utterance& utt : corpus) {
    const PosteriorSequence tgt = frame_posteriors(target_asr, utt);
    const PosteriorSequence src = frame_posteriors(source_asr, utt);
    const PosteriorSequence mapped =
        map_posteriors(model, source_language, src);
    for (std::size_t t = 0; t < tgt.length(); ++t) {
      if (argmax_row(mapped.frames, t) == argmax_row(tgt.frames, t)) {
        ++acc.correctly_mapped_frames;
      }
      ++acc.total_frames;
    }
  }
  acc.ratio = static_cast<double>(acc.correctly_mapped_frames) /
              static_cast<double>(acc.total_frames);
  return acc;
}

void save_mesd_model(const MesdModel& model, const std::string& path) {
  save_checkpoint(path, model.params);
  nlohmann::json meta;
  meta["kind"] = "mesd";
  meta["target_language"] = model.target_language;
  meta["source_languages"] = model.source_languages;
  meta["input_dims"] = model.input_dims;
  meta["hidden"] = model.hidden;
  meta["output_dim"] = model.output_dim;
  std::ofstream out(path + ".json", std::ios::trunc);
  if (!out) throw Error("cannot write model metadata: " + path + ".json");
  out << meta.dump(2) << "\n";
}

MesdModel load_mesd_model(const std::string& path) {
  std::ifstream in(path + ".json");
  if (!in) throw Error("cannot open model metadata: " + path + ".json");
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed model metadata " + path + ".json: " + e.what());
  }
  MesdModel m;
  try {
    if (meta.at("kind").get<std::string>() != "mesd") {
      throw Error("not a mapping model: " + path);
    }
    m.target_language = meta.at("target_language").get<std::string>();
    m.source_languages =
        meta.at("source_languages").get<std::vector<std::string>>();
    m.input_dims =
        meta.at("input_dims").get<std::map<std::string, std::size_t>>();
    m.hidden = meta.at("hidden").get<std::size_t>();
    m.output_dim = meta.at("output_dim").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("incomplete model metadata " + path + ".json: " + e.what());
  }
  m.params = load_checkpoint(path);
  for (const std::string& name : expected_param_names(m)) {
    if (m.params.find(name) == m.params.end()) {
      throw Error("mapping checkpoint is missing parameter '" + name + "'");
    }
  }
  return m;
}

}  // namespace must
