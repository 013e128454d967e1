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

// Scale-factor coordination: single-source runs over a λ grid, pseudo-label
// agreement, and the selection of λ* with the induced encoder groups.

#ifndef CEPC_COORDINATION_HPP_
#define CEPC_COORDINATION_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cepc/data.hpp"
#include "cepc/engine.hpp"

namespace cepc::coord {

struct LambdaGrid {
  std::vector<double> values{1.0, 0.1, 0.01, 0.001, 0.0001};

  /// Throws ConfigError unless non-empty, positive, finite and distinct.
  void validate() const;
  /// Index of `lambda` in the grid; ConfigError if absent.
  std::size_t index_of(double lambda) const;
};

struct SingleSourceRun {
  std::string source;
  double lambda = 0.0;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  std::vector<int> pseudo_labels;
  std::vector<double> target_distribution;
  std::vector<double> source_distribution;
  double js_to_source = 0.0;
  /// Filled only when requested; large for corpus-scale inputs.
  Matrix source_encodings;
  Matrix target_encodings;
  std::vector<train::LossRecord> trace;
};

/// Label histogram normalized to a distribution over `num_classes`.
std::vector<double> label_distribution(std::span<const int> labels,
                                       std::size_t num_classes);

/// Trains a fresh encoder and classifier on NLL + λ·coral. `cfg.seed`
/// drives every random choice; pseudo-labels cover the whole target.
SingleSourceRun train_single_source(const data::DomainDataset& source,
                                    const data::DomainDataset& target,
                                    double lambda,
                                    const train::TrainConfig& cfg,
                                    bool keep_encodings = true);

/// Σ over ordered pairs (i, j), i ≠ j, of F1(set_i as gold, set_j).
double pairwise_agreement(std::span<const std::vector<int>> label_sets);

/// √JSD with base-2 logarithms, in [0, 1].
double js_distance(std::span<const double> p, std::span<const double> q);

struct CellStats {
  std::string source;
  double lambda = 0.0;
  double js_mean = 0.0;
  std::vector<double> js_per_repeat;
};

struct CoordinationPlan {
  std::vector<std::string> sources;
  std::vector<double> grid;
  std::size_t repeats = 0;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, double> lambda_star;
  std::vector<std::vector<std::string>> groups;
  /// Normalized Corr (divided by M(M−1)) at the start and end of the ascent.
  double corr_initial = 0.0;
  double corr_final = 0.0;
  std::size_t passes = 0;
  std::size_t training_calls = 0;
  std::vector<CellStats> cells;

  /// Group index per source, in `sources` order.
  std::vector<std::size_t> group_of() const;
  std::vector<double> lambdas() const;
};

struct SelectOptions {
  double threshold = 0.005;
};

/// Averages over repeats, orders each source's candidates by JS distance,
/// starts at the JS minimum and runs coordinate ascent on normalized Corr.
/// `runs` must hold every (source, λ, repeat) cell; ConfigError otherwise.
CoordinationPlan select_lambdas(std::span<const SingleSourceRun> runs,
                                std::span<const std::string> sources,
                                const LambdaGrid& grid, std::size_t repeats,
                                const SelectOptions& options = {});

/// Sources with equal λ* share a group; groups are numbered by first
/// appearance in `sources` order.
std::vector<std::vector<std::string>> group_encoders(
    std::span<const std::string> sources,
    const std::map<std::string, double>& lambda_star);

struct CoordinationConfig {
  LambdaGrid grid;
  std::size_t repeats = 5;
  double threshold = 0.005;
};

CoordinationConfig coordination_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CoordinationConfig& c);

/// Seed of repeat `r`; independent of λ so every grid value sees the same
/// initializations and batches.
std::uint64_t repeat_seed(std::uint64_t base_seed, std::size_t repeat);

struct CoordinationResult {
  CoordinationPlan plan;
  std::vector<SingleSourceRun> runs;
};

/// All M × |grid| × repeats trainings followed by selection. Encodings are
/// kept for repeat 0 only.
CoordinationResult run_coordination(std::span<const data::DomainDataset> sources,
                                    const data::DomainDataset& target,
                                    const CoordinationConfig& coord_cfg,
                                    const train::TrainConfig& train_cfg);

nlohmann::json to_json(const CoordinationPlan& plan);
CoordinationPlan plan_from_json(const nlohmann::json& j);
void save_plan(const CoordinationPlan& plan, const std::filesystem::path& path);
CoordinationPlan load_plan(const std::filesystem::path& path);

}  // namespace cepc::coord

#endif  // CEPC_COORDINATION_HPP_
