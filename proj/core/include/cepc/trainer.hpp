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

// Multi-source CEPC training, majority-vote inference and the model/trace
// file formats.

#ifndef CEPC_TRAINER_HPP_
#define CEPC_TRAINER_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cepc/coordination.hpp"
#include "cepc/data.hpp"
#include "cepc/engine.hpp"
#include "cepc/reliability.hpp"

namespace cepc::train {

struct CepcOptions {
  /// false drops both the pairing and the medium terms.
  bool paired = true;
  StepObserver observer;
};

/// Full objective: Σ_i [NLL_i + λ_i coral_i] + α L_div + w L_med.
/// ConfigError when fewer than 2 sources or the plan does not name them;
/// FormatError when the table does not cover the target.
TrainResult train_cepc(std::span<const data::DomainDataset> sources,
                       const data::DomainDataset& target,
                       const coord::CoordinationPlan& plan,
                       const reliability::ReliabilityTable& table,
                       const TrainConfig& cfg, const CepcOptions& options = {});

struct Prediction {
  std::vector<int> labels;
  /// documents × sources
  std::vector<std::vector<int>> votes;
  /// documents × classes, averaged over sources
  Matrix mean_probs;
};

/// Most-voted class per row; exact ties go to the tied class with the
/// largest mean probability, then to the lowest class index.
std::vector<int> resolve_votes(const std::vector<std::vector<int>>& votes,
                               const Matrix& mean_probs);

/// Every source classifier votes through its own encoder. Medium heads
/// take no part.
Prediction predict_majority(const CepcModel& model, const Matrix& features);

/// Magic "CEPC", u16 version, u32-length JSON metadata, then each
/// parameter matrix as u32 rows, u32 cols and little-endian f32 values:
/// encoders, classifiers, mediums, each layer's weight before its bias.
/// Optimizer state is not stored.
std::vector<std::uint8_t> encode_checkpoint(const CepcModel& model);
CepcModel decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                            const std::string& what = "checkpoint");
void save_checkpoint(const CepcModel& model, const std::filesystem::path& path);
CepcModel load_checkpoint(const std::filesystem::path& path);

/// Columns: step, nll, coral, l_div, l_med, alpha, total.
std::string loss_trace_csv(std::span<const LossRecord> trace);
void save_loss_trace(std::span<const LossRecord> trace,
                     const std::filesystem::path& path);

}  // namespace cepc::train

#endif  // CEPC_TRAINER_HPP_
