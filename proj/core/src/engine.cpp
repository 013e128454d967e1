// Copyright 2026 The cepc Authors
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

#include "cepc/engine.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "cepc/losses.hpp"

namespace cepc::train {

using data::DomainDataset;
using nlohmann::json;

void TrainConfig::validate() const {
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw ConfigError("batch_size must be even and >= 2, got " +
                      std::to_string(batch_size));
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(alpha0 >= 0.0)) throw ConfigError("alpha0 must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (classifier_hidden == 0) throw ConfigError("classifier_hidden must be > 0");
  if (!(medium_weight >= 0.0)) throw ConfigError("medium_weight must be >= 0");
}

TrainConfig train_config_from_json(const json& j, TrainConfig d) {
  try {
    d.batch_size = j.value("batch_size", d.batch_size);
    d.epochs = j.value("epochs", d.epochs);
    d.alpha0 = j.value("alpha0", d.alpha0);
    d.lr = j.value("lr", d.lr);
    d.encoder_width = j.value("encoder_width", d.encoder_width);
    d.classifier_hidden = j.value("classifier_hidden", d.classifier_hidden);
    d.use_medium = j.value("use_medium", d.use_medium);
    d.medium_weight = j.value("medium_weight", d.medium_weight);
    d.seed = j.value("seed", d.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  d.validate();
  return d;
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"alpha0", c.alpha0},
          {"lr", c.lr},
          {"encoder_width", c.encoder_width},
          {"classifier_hidden", c.classifier_hidden},
          {"use_medium", c.use_medium},
          {"medium_weight", c.medium_weight},
          {"seed", c.seed}};
}

std::vector<std::size_t> CepcModel::group_leaders() const {
  std::vector<std::size_t> leaders(count_groups(group_of), group_of.size());
  for (std::size_t i = group_of.size(); i-- > 0;) leaders[group_of[i]] = i;
  return leaders;
}

std::size_t count_groups(std::span<const std::size_t> group_of) {
  if (group_of.empty()) throw ConfigError("no sources");
  const std::size_t groups =
      *std::max_element(group_of.begin(), group_of.end()) + 1;
  std::vector<bool> used(groups, false);
  for (std::size_t g : group_of) used[g] = true;
  if (std::find(used.begin(), used.end(), false) != used.end()) {
    throw ConfigError("encoder groups must be numbered 0..G-1 without gaps");
  }
  return groups;
}

namespace {

nn::NetSpec encoder_spec(std::size_t input_dim, std::size_t width) {
  return {{input_dim, width}, nn::Activation::kTanh, nn::OutputHead::kNone};
}

nn::NetSpec head_spec(std::size_t width, std::size_t hidden,
                      std::size_t classes) {
  return {{width, hidden, classes}, nn::Activation::kNone,
          nn::OutputHead::kSoftmax};
}

}  // namespace

CepcModel init_model(std::vector<std::string> source_names,
                     std::vector<std::size_t> group_of,
                     std::vector<double> lambdas, std::size_t input_dim,
                     std::size_t num_classes, const TrainConfig& cfg) {
  cfg.validate();
  if (source_names.size() != group_of.size() ||
      source_names.size() != lambdas.size()) {
    throw ConfigError("init_model: names, groups and lambdas differ in length");
  }
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw ConfigError("init_model: scale factors must be finite and >= 0");
    }
  }
  const std::size_t groups = count_groups(group_of);
  const std::size_t width = cfg.encoder_width == 0 ? input_dim : cfg.encoder_width;

  CepcModel m;
  m.source_names = std::move(source_names);
  m.group_of = std::move(group_of);
  m.lambdas = std::move(lambdas);
  m.num_classes = num_classes;
  const RngStream root(cfg.seed, "cepc");
  const nn::AdamConfig adam{cfg.lr};
  const auto leaders = m.group_leaders();
  for (std::size_t e = 0; e < groups; ++e) {
    RngStream rng = root.child("encoder/" + m.source_names[leaders[e]]);
    m.encoders.push_back(
        nn::init_params<float>(encoder_spec(input_dim, width), rng));
    m.encoder_opt.push_back(nn::make_optimizer(m.encoders.back(), adam));
  }
  for (const auto& name : m.source_names) {
    RngStream rng = root.child("classifier/" + name);
    m.classifiers.push_back(nn::init_params<float>(
        head_spec(width, cfg.classifier_hidden, num_classes), rng));
    m.classifier_opt.push_back(nn::make_optimizer(m.classifiers.back(), adam));
  }
  if (cfg.use_medium) {
    for (std::size_t e = 0; e < groups; ++e) {
      RngStream rng = root.child("medium/" + m.source_names[leaders[e]]);
      m.mediums.push_back(nn::init_params<float>(
          head_spec(width, cfg.classifier_hidden, num_classes), rng));
      m.medium_opt.push_back(nn::make_optimizer(m.mediums.back(), adam));
    }
  }
  return m;
}

std::vector<std::size_t> balanced_batch(const DomainDataset& dataset,
                                        std::size_t batch_size,
                                        std::size_t num_classes,
                                        RngStream& rng) {
  if (dataset.role != data::Role::kSource) {
    throw DataError("balanced_batch: '" + dataset.name + "' is unlabeled");
  }
  if (num_classes == 0 || batch_size % num_classes != 0) {
    throw ConfigError("balanced_batch: batch " + std::to_string(batch_size) +
                      " not divisible by " + std::to_string(num_classes) +
                      " classes");
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int y = dataset.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DataError("balanced_batch: label out of range in '" +
                      dataset.name + "'");
    }
    by_class[static_cast<std::size_t>(y)].push_back(i);
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (by_class[c].empty()) {
      throw DataError("balanced_batch: class " + std::to_string(c) +
                      " of '" + dataset.name + "' is empty");
    }
  }
  const std::size_t per_class = batch_size / num_classes;
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      out.push_back(by_class[c][rng.index(by_class[c].size())]);
    }
  }
  return out;
}

double alpha_schedule(std::size_t step, std::size_t total_steps,
                      double alpha0) {
  if (total_steps == 0) throw ConfigError("alpha_schedule: total_steps == 0");
  if (step >= total_steps) return 0.0;
  return alpha0 * (1.0 - static_cast<double>(step) /
                             static_cast<double>(total_steps));
}

ModelGrads ModelGrads::zeros_like(const CepcModel& model) {
  ModelGrads g;
  for (const auto& n : model.encoders) {
    g.encoders.push_back(nn::MlpGrads<float>::zeros_like(n));
  }
  for (const auto& n : model.classifiers) {
    g.classifiers.push_back(nn::MlpGrads<float>::zeros_like(n));
  }
  for (const auto& n : model.mediums) {
    g.mediums.push_back(nn::MlpGrads<float>::zeros_like(n));
  }
  return g;
}

LossRecord compute_step(const CepcModel& model,
                        std::span<const DomainDataset> sources,
                        const DomainDataset& target, const StepBatch& batch,
                        double alpha, const IndicatorView& indicator,
                        const StepOptions& options, ModelGrads& grads) {
  const std::size_t m = model.num_sources();
  const std::size_t groups = model.num_groups();
  if (sources.size() != m || batch.source_indices.size() != m) {
    throw ConfigError("compute_step: source count mismatch");
  }
  const bool divergence = options.use_divergence && alpha > 0.0 && m >= 2;
  const bool medium = options.use_medium && !model.mediums.empty();
  if (divergence && indicator.sources != m) {
    throw ConfigError("compute_step: indicator does not cover every source");
  }

  LossRecord rec;
  rec.alpha = alpha;

  const Matrix tgt_x = select_rows(
      target.features, std::span<const std::size_t>(batch.target_indices));
  std::vector<nn::ForwardTrace<float>> enc_tgt(groups);
  for (std::size_t e = 0; e < groups; ++e) {
    enc_tgt[e] = nn::mlp_forward(model.encoders[e], tgt_x);
  }
  std::vector<std::optional<Matrix>> tgt_upstream(groups);
  auto add_tgt_upstream = [&](std::size_t e, const Matrix& g, float scale) {
    if (!tgt_upstream[e]) {
      tgt_upstream[e] = Matrix(g.rows(), g.cols());
    }
    add_inplace(*tgt_upstream[e], g, scale);
  };

  // Classification and discrepancy terms, source by source.
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t g = model.group_of[i];
    const auto& idx = batch.source_indices[i];
    const Matrix src_x =
        select_rows(sources[i].features, std::span<const std::size_t>(idx));
    std::vector<int> labels;
    labels.reserve(idx.size());
    for (std::size_t k : idx) labels.push_back(sources[i].labels[k]);

    const auto enc_src = nn::mlp_forward(model.encoders[g], src_x);
    const auto cls_src = nn::mlp_forward(model.classifiers[i], enc_src.outputs);
    const auto nll = nn::softmax_nll(cls_src.logits, std::span<const int>(labels));
    rec.nll += nll.loss;

    auto cls_grads = nn::mlp_backward(model.classifiers[i], cls_src, nll.grad,
                                      nn::GradWrt::kLogits);
    grads.classifiers[i].add(cls_grads);
    Matrix enc_src_upstream = std::move(cls_grads.input);

    const double lambda = model.lambdas[i];
    if (lambda > 0.0) {
      const auto coral = losses::coral_loss(enc_src.outputs, enc_tgt[g].outputs);
      rec.coral += lambda * coral.value;
      const auto scale = static_cast<float>(lambda);
      add_inplace(enc_src_upstream, coral.grad("source"), scale);
      add_tgt_upstream(g, coral.grad("target"), scale);
    }
    grads.encoders[g].add(nn::mlp_backward(model.encoders[g], enc_src,
                                           enc_src_upstream,
                                           nn::GradWrt::kOutputs, true));
  }

  // Target-side class probabilities, shared by the pairing and medium terms.
  std::vector<nn::ForwardTrace<float>> cls_tgt;
  std::vector<Matrix> tgt_probs;
  if (divergence || medium) {
    for (std::size_t i = 0; i < m; ++i) {
      cls_tgt.push_back(nn::mlp_forward(model.classifiers[i],
                                        enc_tgt[model.group_of[i]].outputs));
      tgt_probs.push_back(cls_tgt.back().outputs);
    }
  }

  if (divergence) {
    std::vector<losses::LossValue<float>> psis;
    std::vector<std::uint8_t> col(batch.target_indices.size());
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t d = 0; d < col.size(); ++d) {
        col[d] = indicator.at(batch.target_indices[d], i);
      }
      psis.push_back(losses::divergence_psi<float>(
          i, std::span<const Matrix>(tgt_probs),
          std::span<const std::uint8_t>(col)));
    }
    const auto div = losses::divergence_loss<float>(
        std::span<const losses::LossValue<float>>(psis));
    rec.l_div = div.value;
    const auto scale = static_cast<float>(alpha);
    for (std::size_t k = 0; k < m; ++k) {
      auto it = div.grads.find(losses::source_role(k));
      if (it == div.grads.end()) continue;
      Matrix upstream(it->second.rows(), it->second.cols());
      add_inplace(upstream, it->second, scale);
      auto g = nn::mlp_backward(model.classifiers[k], cls_tgt[k], upstream);
      grads.classifiers[k].add(g);
      add_tgt_upstream(model.group_of[k], g.input, 1.0f);
    }
  }

  if (medium) {
    std::vector<nn::ForwardTrace<float>> med;
    std::vector<Matrix> med_probs;
    for (std::size_t e = 0; e < groups; ++e) {
      med.push_back(nn::mlp_forward(model.mediums[e], enc_tgt[e].outputs));
      med_probs.push_back(med.back().outputs);
    }
    const auto ml = losses::medium_loss<float>(
        std::span<const Matrix>(med_probs), std::span<const Matrix>(tgt_probs));
    rec.l_med = ml.value;
    const auto scale = static_cast<float>(options.medium_weight);
    for (std::size_t e = 0; e < groups; ++e) {
      const auto& gm = ml.grad(losses::medium_role(e));
      Matrix upstream(gm.rows(), gm.cols());
      add_inplace(upstream, gm, scale);
      auto g = nn::mlp_backward(model.mediums[e], med[e], upstream);
      grads.mediums[e].add(g);
      add_tgt_upstream(e, g.input, 1.0f);
    }
  }

  for (std::size_t e = 0; e < groups; ++e) {
    if (!tgt_upstream[e]) continue;
    grads.encoders[e].add(nn::mlp_backward(model.encoders[e], enc_tgt[e],
                                           *tgt_upstream[e],
                                           nn::GradWrt::kOutputs, true));
  }

  rec.total = rec.nll + rec.coral + alpha * rec.l_div +
              (medium ? options.medium_weight * rec.l_med : 0.0);
  return rec;
}

void apply_step(CepcModel& model, const ModelGrads& grads,
                const StepOptions& options) {
  for (std::size_t e = 0; e < model.num_groups(); ++e) {
    nn::adam_step(model.encoders[e], grads.encoders[e], model.encoder_opt[e]);
  }
  for (std::size_t i = 0; i < model.num_sources(); ++i) {
    nn::adam_step(model.classifiers[i], grads.classifiers[i],
                  model.classifier_opt[i]);
  }
  if (options.use_medium) {
    for (std::size_t e = 0; e < model.mediums.size(); ++e) {
      nn::adam_step(model.mediums[e], grads.mediums[e], model.medium_opt[e]);
    }
  }
}

TrainResult run_training(std::span<const DomainDataset> sources,
                         const DomainDataset& target,
                         std::vector<std::size_t> group_of,
                         std::vector<double> lambdas,
                         const IndicatorView& indicator,
                         const StepOptions& options, const TrainConfig& cfg,
                         const StepObserver& observer) {
  cfg.validate();
  if (sources.empty()) throw ConfigError("run_training: no sources");
  if (target.size() == 0) throw DataError("run_training: empty target");
  std::vector<std::string> names;
  std::size_t max_n = 0;
  for (const auto& s : sources) {
    if (s.size() == 0) throw DataError("run_training: empty source '" + s.name + "'");
    if (s.dim() != target.dim()) {
      throw DataError("run_training: '" + s.name + "' has dim " +
                      std::to_string(s.dim()) + ", target has " +
                      std::to_string(target.dim()));
    }
    names.push_back(s.name);
    max_n = std::max(max_n, s.size());
  }
  const std::size_t classes =
      data::num_classes(sources);

  TrainConfig model_cfg = cfg;
  model_cfg.use_medium = options.use_medium;
  TrainResult result;
  result.model = init_model(std::move(names), std::move(group_of),
                            std::move(lambdas), target.dim(), classes, model_cfg);
  CepcModel& model = result.model;

  const RngStream root(cfg.seed, "cepc");
  std::vector<RngStream> batch_rngs;
  for (const auto& s : sources) batch_rngs.push_back(root.child("batch/" + s.name));
  RngStream target_rng = root.child("target");

  const std::size_t b = cfg.batch_size;
  const std::size_t steps_per_epoch = (max_n + b - 1) / b;
  const std::size_t total = cfg.epochs * steps_per_epoch;
  const std::size_t schedule_len = std::max<std::size_t>(total - 1, 1);
  result.trace.reserve(total);

  for (std::size_t step = 0; step < total; ++step) {
    const double alpha = alpha_schedule(step, schedule_len, cfg.alpha0);
    StepBatch batch;
    for (std::size_t i = 0; i < sources.size(); ++i) {
      batch.source_indices.push_back(
          balanced_batch(sources[i], b, classes, batch_rngs[i]));
    }
    batch.target_indices.reserve(b);
    for (std::size_t k = 0; k < b; ++k) {
      batch.target_indices.push_back(target_rng.index(target.size()));
    }

    ModelGrads grads = ModelGrads::zeros_like(model);
    LossRecord rec = compute_step(model, sources, target, batch, alpha,
                                  indicator, options, grads);
    rec.step = step;
    if (!std::isfinite(rec.total)) {
      throw TrainingError(
          "non-finite loss at step " + std::to_string(step) + " (nll " +
          std::to_string(rec.nll) + ", coral " + std::to_string(rec.coral) +
          ", l_div " + std::to_string(rec.l_div) + ", l_med " +
          std::to_string(rec.l_med) + ")");
    }
    if (observer) observer({step, &model, &grads, &rec});
    apply_step(model, grads, options);
    result.trace.push_back(rec);
  }
  return result;
}

Matrix source_probabilities(const CepcModel& model, std::size_t k,
                            const Matrix& features) {
  const auto enc = nn::mlp_forward(model.encoder_for(k), features);
  return nn::mlp_forward(model.classifiers.at(k), enc.outputs).outputs;
}

}  // namespace cepc::train
