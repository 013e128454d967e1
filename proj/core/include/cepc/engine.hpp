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

// Training machinery shared by single-source runs (coordination) and the
// full multi-source model: model layout, batch construction, one
// optimization step, and the training loop.

#ifndef CEPC_ENGINE_HPP_
#define CEPC_ENGINE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cepc/data.hpp"
#include "cepc/nn.hpp"
#include "cepc/rng.hpp"

namespace cepc::train {

struct TrainConfig {
  std::size_t batch_size = 50;
  std::size_t epochs = 3;
  double alpha0 = 0.9;
  double lr = 1e-3;
  /// 0 means "same as the input dimension".
  std::size_t encoder_width = 0;
  std::size_t classifier_hidden = 768;
  bool use_medium = true;
  double medium_weight = 1.0;
  std::uint64_t seed = 1;

  /// Throws ConfigError: batch even and >= 2, epochs >= 1, alpha0 >= 0.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

TrainConfig train_config_from_json(const nlohmann::json& j,
                                   TrainConfig defaults = {});
nlohmann::json to_json(const TrainConfig& cfg);

/// Encoders are shared by every source of a group; classifiers are per
/// source; medium heads are per encoder and only used during training.
struct CepcModel {
  std::vector<std::string> source_names;
  std::vector<std::size_t> group_of;
  std::vector<double> lambdas;
  std::size_t num_classes = 2;
  std::vector<nn::Mlp> encoders;
  std::vector<nn::Mlp> classifiers;
  std::vector<nn::Mlp> mediums;
  std::vector<nn::OptimizerState> encoder_opt;
  std::vector<nn::OptimizerState> classifier_opt;
  std::vector<nn::OptimizerState> medium_opt;

  std::size_t num_sources() const noexcept { return classifiers.size(); }
  std::size_t num_groups() const noexcept { return encoders.size(); }
  const nn::Mlp& encoder_for(std::size_t source) const {
    return encoders.at(group_of.at(source));
  }
  /// Lowest-index source of each group; names the group's RNG streams.
  std::vector<std::size_t> group_leaders() const;

  bool operator==(const CepcModel&) const = default;
};

/// Checks that `group_of` maps sources onto 0..G-1 with every group used.
std::size_t count_groups(std::span<const std::size_t> group_of);

CepcModel init_model(std::vector<std::string> source_names,
                     std::vector<std::size_t> group_of,
                     std::vector<double> lambdas, std::size_t input_dim,
                     std::size_t num_classes, const TrainConfig& cfg);

/// Exactly batch/L indices per class, drawn with replacement.
std::vector<std::size_t> balanced_batch(const data::DomainDataset& dataset,
                                        std::size_t batch_size,
                                        std::size_t num_classes,
                                        RngStream& rng);

/// Linear decay α₀ (1 − step / total_steps).
double alpha_schedule(std::size_t step, std::size_t total_steps,
                      double alpha0);

struct StepBatch {
  std::vector<std::vector<std::size_t>> source_indices;
  std::vector<std::size_t> target_indices;
};

/// Per-step loss components. `coral` is the λ-weighted sum, `l_med` is
/// unweighted; `total` is what the gradients differentiate.
struct LossRecord {
  std::size_t step = 0;
  double nll = 0.0;
  double coral = 0.0;
  double l_div = 0.0;
  double l_med = 0.0;
  double alpha = 0.0;
  double total = 0.0;
};

struct ModelGrads {
  std::vector<nn::MlpGrads<float>> encoders;
  std::vector<nn::MlpGrads<float>> classifiers;
  std::vector<nn::MlpGrads<float>> mediums;

  static ModelGrads zeros_like(const CepcModel& model);
};

struct StepOptions {
  bool use_divergence = true;
  bool use_medium = true;
  double medium_weight = 1.0;
};

/// Row-major (target docs x sources) one-hot reliability indicator.
struct IndicatorView {
  std::span<const std::uint8_t> cells;
  std::size_t sources = 0;

  std::uint8_t at(std::size_t doc, std::size_t source) const {
    return cells[doc * sources + source];
  }
};

/// Forward and backward pass of the full objective for one batch.
/// Gradients are accumulated into `grads`; parameters are untouched.
LossRecord compute_step(const CepcModel& model,
                        std::span<const data::DomainDataset> sources,
                        const data::DomainDataset& target,
                        const StepBatch& batch, double alpha,
                        const IndicatorView& indicator,
                        const StepOptions& options, ModelGrads& grads);

/// One optimizer update of every parameter set that received gradients.
void apply_step(CepcModel& model, const ModelGrads& grads,
                const StepOptions& options);

struct StepInfo {
  std::size_t step = 0;
  const CepcModel* model = nullptr;
  const ModelGrads* grads = nullptr;
  const LossRecord* losses = nullptr;
};
using StepObserver = std::function<void(const StepInfo&)>;

struct TrainResult {
  CepcModel model;
  std::vector<LossRecord> trace;
};

/// The training loop. Steps per epoch are ⌈max_i n_i / B⌉; batches come
/// from the substreams "batch/<source name>" and "target" of cfg.seed.
TrainResult run_training(std::span<const data::DomainDataset> sources,
                         const data::DomainDataset& target,
                         std::vector<std::size_t> group_of,
                         std::vector<double> lambdas,
                         const IndicatorView& indicator,
                         const StepOptions& options, const TrainConfig& cfg,
                         const StepObserver& observer = {});

/// Class probabilities of source `k` on `features`, through its encoder.
Matrix source_probabilities(const CepcModel& model, std::size_t k,
                            const Matrix& features);

}  // namespace cepc::train

#endif  // CEPC_ENGINE_HPP_
