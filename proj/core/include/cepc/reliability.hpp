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

// Which source classifier to trust on each target document: transformation
// costs from covariance geometry, capacities from a source-vs-target
// logistic discriminator, and the one-hot indicator built from both.

#ifndef CEPC_RELIABILITY_HPP_
#define CEPC_RELIABILITY_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cepc/engine.hpp"
#include "cepc/matrix.hpp"
#include "cepc/rng.hpp"

namespace cepc::reliability {

inline constexpr double kMinCost = 1e-6;
inline constexpr double kProbClamp = 1e-6;

struct CovarianceStats {
  std::vector<double> mean;
  MatrixD cov;
  std::size_t n = 0;
};

/// Mean and (n − 1)-denominator covariance. DegenerateError below 2 rows.
CovarianceStats source_covariance(const Matrix& encodings);

/// Contribution of row r: (x_r − μ)ᵀ(x_r − μ) / (n − 1), μ over all rows.
MatrixD pointwise_target_covariance(const Matrix& encodings, std::size_t r);

/// ‖a − b‖²_F. InputError on a shape mismatch.
double transformation_cost(const MatrixD& c_r_t, const MatrixD& c_s);

/// Cost of every target row against the source covariance, without
/// materializing the per-row matrices.
std::vector<double> transformation_costs(const Matrix& source_encodings,
                                         const Matrix& target_encodings);

struct DiscriminatorConfig {
  std::size_t epochs = 200;
  double lr = 0.1;
  double l2 = 1e-4;
};

struct DomainDiscriminator {
  std::vector<double> weights;
  double bias = 0.0;
  double final_loss = 0.0;
  std::size_t epochs = 0;

  /// P(source | x), clamped to [kProbClamp, 1 − kProbClamp].
  double prob_source(std::span<const float> x) const;
};

/// Logistic regression, source = 1, target = 0, full-batch gradient
/// descent on the mean log-loss plus (l2 / 2)‖w‖².
DomainDiscriminator train_discriminator(const Matrix& source_encodings,
                                        const Matrix& target_encodings,
                                        RngStream& rng,
                                        const DiscriminatorConfig& cfg = {});

/// q = P(T) P(S|x) / (P(S) P(T|x)) with P(S) = n_s / (n_s + n_t).
double density_ratio(double prob_source, std::size_t n_s, std::size_t n_t);
double density_ratio(const DomainDiscriminator& disc, std::span<const float> x,
                     std::size_t n_s, std::size_t n_t);

enum class ScoreMode {
  kFull,           // ln q + 1/d
  kCostOnly,       // 1/d
  kCapacityOnly,   // ln q
};

std::string to_string(ScoreMode mode);
ScoreMode score_mode_from_string(const std::string& s);

/// Logarithm of q · e^{1/d}, with d clamped to kMinCost.
double reliability_score(double q, double d, ScoreMode mode = ScoreMode::kFull);

/// Row-major (document × source) table.
struct ReliabilityTable {
  std::vector<std::string> doc_ids;
  std::vector<std::string> sources;
  std::vector<double> cost;
  std::vector<double> q;
  std::vector<double> log_score;
  std::vector<std::uint8_t> indicator;

  std::size_t num_docs() const noexcept { return doc_ids.size(); }
  std::size_t num_sources() const noexcept { return sources.size(); }
  std::size_t cell(std::size_t doc, std::size_t source) const noexcept {
    return doc * sources.size() + source;
  }
  train::IndicatorView view() const { return {indicator, sources.size()}; }
  /// Number of documents assigned to each source.
  std::vector<std::size_t> indicator_counts() const;

  bool operator==(const ReliabilityTable&) const = default;
};

/// Sets one indicator per row at the largest log_score; ties go to the
/// lowest source index. InputError on an empty or ragged table.
void build_indicator(ReliabilityTable& table);

/// Assembles scores from per-source cost and q columns and builds the
/// indicator.
ReliabilityTable make_table(std::vector<std::string> doc_ids,
                            std::vector<std::string> sources,
                            const std::vector<std::vector<double>>& costs,
                            const std::vector<std::vector<double>>& qs,
                            ScoreMode mode = ScoreMode::kFull);

/// Same costs and capacities, rescored under another mode.
ReliabilityTable rescore(const ReliabilityTable& table, ScoreMode mode);

/// Encodings that feed one source's column of the table.
struct SourceEncodings {
  /// Source-only (λ = 0) encoder: costs.
  Matrix cost_source;
  Matrix cost_target;
  /// Coordination encoder at λ*: capacities.
  Matrix capacity_source;
  Matrix capacity_target;
};

ReliabilityTable compute_table(std::span<const std::string> doc_ids,
                               std::span<const std::string> sources,
                               std::span<const SourceEncodings> encodings,
                               std::uint64_t seed,
                               ScoreMode mode = ScoreMode::kFull,
                               const DiscriminatorConfig& disc_cfg = {});

/// CSV columns: doc_id, source, cost, q, log_score, indicator.
void save_table_csv(const ReliabilityTable& table,
                    const std::filesystem::path& path);
ReliabilityTable load_table_csv(const std::filesystem::path& path);

/// FormatError unless the table covers exactly `doc_ids` and `sources`
/// in that order.
void check_table_covers(const ReliabilityTable& table,
                        std::span<const std::string> doc_ids,
                        std::span<const std::string> sources);

}  // namespace cepc::reliability

#endif  // CEPC_RELIABILITY_HPP_
