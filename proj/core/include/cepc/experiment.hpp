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

// End-to-end orchestration: coordinate, score reliability, train, predict
// and evaluate, plus baselines, ablations and the metrics report.

#ifndef CEPC_EXPERIMENT_HPP_
#define CEPC_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cepc/coordination.hpp"
#include "cepc/data.hpp"
#include "cepc/metrics.hpp"
#include "cepc/reliability.hpp"
#include "cepc/trainer.hpp"

namespace cepc::eval {

struct PipelineConfig {
  train::TrainConfig train;
  coord::CoordinationConfig coordination;
  reliability::DiscriminatorConfig discriminator;
  reliability::ScoreMode score_mode = reliability::ScoreMode::kFull;
  double oracle_fraction = 0.8;
  bool fixed_lambda = true;
  bool meta_target = true;
  bool oracle = true;

  std::uint64_t seed() const noexcept { return train.seed; }
};

/// Keys: seed, train{...}, coordination{...}, discriminator{...},
/// score_mode, oracle_fraction, baselines{fixed_lambda, meta_target,
/// oracle}. Unknown top-level keys are rejected.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
/// FNV-1a of the canonical JSON dump.
std::string config_hash(const PipelineConfig& cfg);

/// Sources and targets of a manifest with gold labels where available.
struct TargetDomain {
  data::DomainDataset dataset;
  std::optional<std::vector<int>> gold;
};

struct Domains {
  std::vector<data::DomainDataset> sources;
  std::vector<TargetDomain> targets;

  /// The only target, or the one named `name`. ConfigError otherwise.
  const TargetDomain& target(const std::string& name = {}) const;
};

Domains load_domains(const std::filesystem::path& manifest_path);

/// Runs `fn`, prefixing the message of any cepc::Error with `stage`.
template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), stage + ": " + e.what());
  }
}

struct PipelineArtifacts {
  coord::CoordinationPlan plan;
  std::vector<coord::SingleSourceRun> source_only;
  reliability::ReliabilityTable table;
  train::TrainResult cepc;
  train::Prediction prediction;
};

/// Seed of the source-only and capacity runs (repeat 0 of coordination).
std::uint64_t base_run_seed(const PipelineConfig& cfg);

coord::CoordinationResult coordinate(std::span<const data::DomainDataset> sources,
                                     const data::DomainDataset& target,
                                     const PipelineConfig& cfg);

/// λ = 0 single-source runs; their encoders define transformation costs.
std::vector<coord::SingleSourceRun> train_source_only(
    std::span<const data::DomainDataset> sources,
    const data::DomainDataset& target, const PipelineConfig& cfg);

reliability::ReliabilityTable build_reliability(
    std::span<const data::DomainDataset> sources,
    const data::DomainDataset& target, const coord::CoordinationPlan& plan,
    std::span<const coord::SingleSourceRun> coordination_runs,
    std::span<const coord::SingleSourceRun> source_only,
    const PipelineConfig& cfg);

/// Coordination (skipped with a cached plan), reliability, training and
/// majority-vote prediction for one target.
PipelineArtifacts run_pipeline(std::span<const data::DomainDataset> sources,
                               const data::DomainDataset& target,
                               const PipelineConfig& cfg,
                               const coord::CoordinationPlan* cached_plan = nullptr);

struct MetricsRow {
  std::string name;
  std::string kind;  // "cepc", "baseline" or "ablation"
  F1Scores scores;
  nlohmann::json details = nlohmann::json::object();
};

struct ExperimentOptions {
  bool baselines = false;
  bool ablations = false;
};

struct ExperimentResult {
  PipelineArtifacts artifacts;
  std::vector<MetricsRow> rows;
};

/// One seed on one labeled-for-evaluation target.
ExperimentResult run_experiment(std::span<const data::DomainDataset> sources,
                                const TargetDomain& target,
                                const PipelineConfig& cfg,
                                const ExperimentOptions& options,
                                const coord::CoordinationPlan* cached_plan = nullptr);

std::vector<MetricsRow> run_baselines(std::span<const data::DomainDataset> sources,
                                      const TargetDomain& target,
                                      const PipelineArtifacts& artifacts,
                                      const PipelineConfig& cfg);

std::vector<MetricsRow> run_ablations(std::span<const data::DomainDataset> sources,
                                      const TargetDomain& target,
                                      const PipelineArtifacts& artifacts,
                                      const PipelineConfig& cfg);

struct Summary {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> values;

  bool operator==(const Summary&) const = default;
};

/// Sample standard deviation; 0 for a single value.
Summary summarize(std::vector<double> values);

struct RowSummary {
  std::string name;
  std::string kind;
  Summary f1;
  Summary precision;
  Summary recall;
  std::vector<nlohmann::json> details;

  bool operator==(const RowSummary&) const = default;
};

struct DomainReport {
  std::string target;
  std::vector<RowSummary> rows;
  std::vector<nlohmann::json> plans;

  bool operator==(const DomainReport&) const = default;
};

struct MetricsReport {
  std::string config_hash;
  nlohmann::json config;
  std::vector<std::uint64_t> seeds;
  std::vector<DomainReport> domains;
  /// Per row name: per seed, the mean over domains; then summarized.
  std::vector<RowSummary> average;

  bool operator==(const MetricsReport&) const = default;
};

/// `per_seed[s]` holds the rows of seed `seeds[s]`, in a fixed order.
DomainReport summarize_domain(const std::string& target,
                              const std::vector<std::vector<MetricsRow>>& per_seed,
                              std::vector<nlohmann::json> plans);
std::vector<RowSummary> average_domains(std::span<const DomainReport> domains);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
/// Aligned text tables, one per domain plus the average, mean ± std.
std::string render_text(const MetricsReport& report);

/// Every target of the manifest, every seed in `seeds`.
MetricsReport run_bench(const Domains& domains, const PipelineConfig& cfg,
                        std::span<const std::uint64_t> seeds,
                        const ExperimentOptions& options);

/// CSV: doc_id, label, prob_<c> per class, vote_<source> per source.
void save_predictions(const std::vector<std::string>& doc_ids,
                      const train::Prediction& prediction,
                      std::span<const std::string> sources,
                      const std::filesystem::path& path);
/// Reads the doc_id and label columns of a predictions CSV.
std::vector<int> load_predictions(const std::filesystem::path& path,
                                  const std::vector<std::string>& doc_ids);

}  // namespace cepc::eval

#endif  // CEPC_EXPERIMENT_HPP_
