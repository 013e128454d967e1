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

#include "cepc/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "cepc/error.hpp"
#include "test_util.hpp"

namespace cepc::reliability {
namespace {

// Two-pass textbook covariance in long double.
MatrixD textbook_cov(const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<long double> mu(d, 0.0L);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mu[c] += x(r, c);
  for (auto& m : mu) m /= static_cast<long double>(n);
  MatrixD out(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      long double s = 0.0L;
      for (std::size_t r = 0; r < n; ++r) s += (x(r, a) - mu[a]) * (x(r, b) - mu[b]);
      out(a, b) = static_cast<double>(s / static_cast<long double>(n - 1));
    }
  }
  return out;
}

TEST(SourceCovariance, HandCase) {
  const auto s = source_covariance(Matrix::from_rows({{0.0f}, {2.0f}}));
  EXPECT_DOUBLE_EQ(s.cov(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(s.mean[0], 1.0);
  EXPECT_EQ(s.n, 2u);
}

TEST(SourceCovariance, IdenticalRowsGiveZero) {
  const auto s = source_covariance(Matrix::from_rows({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
  for (double v : s.cov.data()) EXPECT_EQ(v, 0.0);
}

TEST(SourceCovariance, MatchesTwoPassOracle) {
  RngStream rng(4);
  const auto x = testing::random_matrix<float>(50, 4, rng, 2.0);
  const auto s = source_covariance(x);
  const auto want = textbook_cov(x);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(s.cov.data()[i], want.data()[i], 1e-6);
}

TEST(SourceCovariance, SingleRowIsDegenerate) {
  EXPECT_THROW(source_covariance(Matrix::from_rows({{1.0f, 2.0f}})), DegenerateError);
}

TEST(PointwiseCovariance, HandCaseAndMeanRow) {
  const auto x = Matrix::from_rows({{0.0f}, {2.0f}});
  EXPECT_DOUBLE_EQ(pointwise_target_covariance(x, 0)(0, 0), 1.0);
  const auto y = Matrix::from_rows({{0.0f, 1.0f}, {1.0f, 2.0f}, {2.0f, 3.0f}});
  const auto at_mean = pointwise_target_covariance(y, 1);
  for (double v : at_mean.data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(pointwise_target_covariance(Matrix::from_rows({{1.0f}}), 0), DegenerateError);
  EXPECT_THROW(pointwise_target_covariance(x, 2), InputError);
}

TEST(PointwiseCovariance, SumsToFullCovariance) {
  RngStream rng(5);
  const auto x = testing::random_matrix<float>(40, 3, rng);
  MatrixD sum(3, 3);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto c = pointwise_target_covariance(x, r);
    for (std::size_t i = 0; i < 9; ++i) sum.data()[i] += c.data()[i];
  }
  const auto full = source_covariance(x).cov;
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(sum.data()[i], full.data()[i], 1e-6);
}

TEST(TransformationCost, KnownValues) {
  const auto a = MatrixD::from_rows({{1.0, 0.5}, {0.5, 2.0}});
  EXPECT_EQ(transformation_cost(a, a), 0.0);
  EXPECT_DOUBLE_EQ(transformation_cost(MatrixD::from_rows({{1.0}}), MatrixD::from_rows({{2.0}})),
                   1.0);
  const auto zero = MatrixD::from_rows({{0.0, 0.0}, {0.0, 0.0}});
  EXPECT_DOUBLE_EQ(transformation_cost(MatrixD::from_rows({{1.0, 0.0}, {0.0, -2.0}}), zero), 5.0);
  EXPECT_THROW(transformation_cost(a, MatrixD::from_rows({{1.0}})), InputError);
}

TEST(TransformationCosts, MatchMaterializedMatrices) {
  RngStream rng(6);
  const auto src = testing::random_matrix<float>(30, 3, rng);
  const auto tgt = testing::random_matrix<float>(25, 3, rng, 1.5);
  const auto costs = transformation_costs(src, tgt);
  const auto cs = source_covariance(src).cov;
  ASSERT_EQ(costs.size(), 25u);
  for (std::size_t r = 0; r < 25; ++r) {
    const double want = transformation_cost(pointwise_target_covariance(tgt, r), cs);
    EXPECT_NEAR(costs[r], want, 1e-9 * std::max(1.0, want));
    EXPECT_GE(costs[r], 0.0);
  }
}

Matrix gaussian_block(std::size_t n, std::size_t d, double mean, RngStream& rng) {
  Matrix m(n, d);
  for (float& v : m.data()) v = static_cast<float>(mean + rng.normal());
  return m;
}

TEST(Discriminator, InseparableStaysNearHalf) {
  RngStream rng(7);
  const auto block = gaussian_block(100, 4, 0.0, rng);
  RngStream train_rng(1);
  const auto disc = train_discriminator(block, block, train_rng);
  for (std::size_t r = 0; r < block.rows(); ++r) {
    const double p = disc.prob_source(block.row(r));
    EXPECT_GE(p, 0.4);
    EXPECT_LE(p, 0.6);
  }
  EXPECT_EQ(disc.epochs, 200u);
}

TEST(Discriminator, SeparatesDistantBlocks) {
  RngStream rng(8);
  const auto src = gaussian_block(100, 4, 5.0, rng);
  const auto tgt = gaussian_block(100, 4, -5.0, rng);
  RngStream train_rng(2);
  const auto disc = train_discriminator(src, tgt, train_rng);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < 100; ++r) {
    correct += disc.prob_source(src.row(r)) > 0.5;
    correct += disc.prob_source(tgt.row(r)) < 0.5;
  }
  EXPECT_GE(correct / 200.0, 0.95);
}

TEST(Discriminator, DeterministicAndValidated) {
  RngStream rng(9);
  const auto src = gaussian_block(40, 3, 1.0, rng);
  const auto tgt = gaussian_block(30, 3, 0.0, rng);
  RngStream r1(3), r2(3);
  const auto a = train_discriminator(src, tgt, r1);
  const auto b = train_discriminator(src, tgt, r2);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
  RngStream r3(3);
  EXPECT_THROW(train_discriminator(src, gaussian_block(30, 2, 0.0, rng), r3), InputError);
}

TEST(DensityRatio, KnownValues) {
  EXPECT_NEAR(density_ratio(0.5, 100, 100), 1.0, 1e-12);
  EXPECT_NEAR(density_ratio(0.75, 300, 100), 1.0, 1e-12);
  EXPECT_NEAR(density_ratio(0.9, 100, 100), 9.0, 1e-12);
}

TEST(DensityRatio, ClampedProbabilitiesStayFinite) {
  const double hi = density_ratio(1.0, 10, 10);
  const double lo = density_ratio(0.0, 10, 10);
  EXPECT_TRUE(std::isfinite(hi));
  EXPECT_GT(lo, 0.0);
  EXPECT_NEAR(hi, (1 - kProbClamp) / kProbClamp, 1e-3);
}

TEST(DensityRatio, SameDistributionMeanNearOne) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RngStream rng(seed);
    const auto src = gaussian_block(200, 4, 0.0, rng);
    const auto tgt = gaussian_block(200, 4, 0.0, rng);
    const auto disc = train_discriminator(src, tgt, rng);
    double mean = 0.0;
    for (std::size_t r = 0; r < tgt.rows(); ++r) mean += density_ratio(disc, tgt.row(r), 200, 200);
    mean /= tgt.rows();
    EXPECT_GE(mean, 0.8) << seed;
    EXPECT_LE(mean, 1.25) << seed;
  }
}

TEST(ReliabilityScore, KnownValues) {
  EXPECT_DOUBLE_EQ(reliability_score(1.0, 1.0), 1.0);
  EXPECT_NEAR(std::exp(reliability_score(1.0, 1.0)), 2.7183, 1e-4);
  EXPECT_NEAR(reliability_score(1.0, 1e12), 0.0, 1e-11);
  EXPECT_DOUBLE_EQ(reliability_score(1.0, 0.0), 1.0 / kMinCost);
  EXPECT_DOUBLE_EQ(reliability_score(std::exp(2.0), 4.0, ScoreMode::kCostOnly), 0.25);
  EXPECT_DOUBLE_EQ(reliability_score(std::exp(2.0), 4.0, ScoreMode::kCapacityOnly), 2.0);
}

TEST(ReliabilityScore, LogArgmaxMatchesProductArgmax) {
  RngStream rng(10);
  for (int t = 0; t < 200; ++t) {
    std::size_t best_log = 0, best_prod = 0;
    double max_log = -1e300, max_prod = -1.0;
    for (std::size_t s = 0; s < 4; ++s) {
      const double q = std::exp(rng.normal());
      const double d = 0.5 + 4.0 * rng.uniform01();
      const double l = reliability_score(q, d);
      const double p = q * std::exp(1.0 / d);
      if (l > max_log) max_log = l, best_log = s;
      if (p > max_prod) max_prod = p, best_prod = s;
    }
    EXPECT_EQ(best_log, best_prod);
  }
}

TEST(ScoreMode, StringRoundTrip) {
  for (auto m : {ScoreMode::kFull, ScoreMode::kCostOnly, ScoreMode::kCapacityOnly}) {
    EXPECT_EQ(score_mode_from_string(to_string(m)), m);
  }
  EXPECT_THROW(score_mode_from_string("bogus"), ConfigError);
}

ReliabilityTable scored(std::vector<std::vector<double>> log_scores) {
  ReliabilityTable t;
  t.sources = {"a", "b"};
  for (std::size_t r = 0; r < log_scores.size(); ++r) {
    t.doc_ids.push_back("d" + std::to_string(r));
    for (double v : log_scores[r]) {
      t.log_score.push_back(v);
      t.cost.push_back(1.0);
      t.q.push_back(1.0);
    }
  }
  return t;
}

TEST(BuildIndicator, ArgmaxAndTies) {
  auto t = scored({{0.2, 0.9}, {0.5, 0.5}, {0.7, -1.0}});
  build_indicator(t);
  EXPECT_EQ(t.indicator, (std::vector<std::uint8_t>{0, 1, 1, 0, 1, 0}));
  EXPECT_EQ(t.indicator_counts(), (std::vector<std::size_t>{2, 1}));
}

TEST(BuildIndicator, EmptyOrRaggedIsInputError) {
  ReliabilityTable empty;
  EXPECT_THROW(build_indicator(empty), InputError);
  auto t = scored({{0.2, 0.9}});
  t.log_score.pop_back();
  EXPECT_THROW(build_indicator(t), InputError);
}

void shuffle(std::vector<std::size_t>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

ReliabilityTable random_table(std::size_t n, std::size_t m, RngStream& rng,
                              ScoreMode mode = ScoreMode::kFull) {
  std::vector<std::string> ids, sources;
  for (std::size_t r = 0; r < n; ++r) ids.push_back("doc" + std::to_string(r));
  for (std::size_t s = 0; s < m; ++s) sources.push_back("s" + std::to_string(s));
  std::vector<std::vector<double>> costs(m), qs(m);
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t r = 0; r < n; ++r) {
      costs[s].push_back(0.2 + 3.0 * rng.uniform01());
      qs[s].push_back(std::exp(rng.normal()));
    }
  }
  return make_table(ids, sources, costs, qs, mode);
}

TEST(MakeTable, RowsAreOneHotAtMaxScore) {
  RngStream rng(11);
  const auto t = random_table(100, 3, rng);
  for (std::size_t r = 0; r < t.num_docs(); ++r) {
    int sum = 0;
    std::size_t arg = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      sum += t.indicator[t.cell(r, s)];
      if (t.log_score[t.cell(r, s)] > t.log_score[t.cell(r, arg)]) arg = s;
    }
    EXPECT_EQ(sum, 1);
    EXPECT_EQ(t.indicator[t.cell(r, arg)], 1);
  }
  EXPECT_THROW(make_table({"a"}, {"s"}, {{1.0}, {1.0}}, {{1.0}}), InputError);
}

TEST(MakeTable, ScalingOneSourceCostNeverRaisesItsCount) {
  RngStream rng(12);
  auto t = random_table(200, 3, rng);
  const auto before = t.indicator_counts();
  for (std::size_t r = 0; r < t.num_docs(); ++r) t.cost[t.cell(r, 1)] *= 3.0;
  const auto after = rescore(t, ScoreMode::kFull).indicator_counts();
  EXPECT_LE(after[1], before[1]);
}

TEST(Rescore, CostOnlyIgnoresCapacities) {
  RngStream rng(13);
  const auto t = random_table(80, 3, rng, ScoreMode::kCostOnly);
  auto permuted = t;
  std::vector<std::size_t> perm(permuted.q.size());
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm, rng);
  for (std::size_t i = 0; i < perm.size(); ++i) permuted.q[i] = t.q[perm[i]];
  EXPECT_EQ(rescore(permuted, ScoreMode::kCostOnly).indicator, t.indicator);
}

TEST(Rescore, CapacityOnlyIgnoresCosts) {
  RngStream rng(14);
  const auto t = random_table(80, 3, rng, ScoreMode::kCapacityOnly);
  auto permuted = t;
  std::vector<std::size_t> perm(permuted.cost.size());
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm, rng);
  for (std::size_t i = 0; i < perm.size(); ++i) permuted.cost[i] = t.cost[perm[i]];
  EXPECT_EQ(rescore(permuted, ScoreMode::kCapacityOnly).indicator, t.indicator);
}

TEST(TableCsv, RoundTripIsExact) {
  RngStream rng(15);
  const auto t = random_table(30, 2, rng);
  testing::TempDir dir;
  save_table_csv(t, dir / "rel.csv");
  EXPECT_EQ(load_table_csv(dir / "rel.csv"), t);
}

TEST(TableCsv, CoverageCheck) {
  RngStream rng(16);
  const auto t = random_table(3, 2, rng);
  const std::vector<std::string> ids{"doc0", "doc1", "doc2"};
  const std::vector<std::string> sources{"s0", "s1"};
  EXPECT_NO_THROW(check_table_covers(t, ids, sources));
  const std::vector<std::string> swapped{"s1", "s0"};
  EXPECT_THROW(check_table_covers(t, ids, swapped), FormatError);
  const std::vector<std::string> fewer{"doc0", "doc1"};
  EXPECT_THROW(check_table_covers(t, fewer, sources), FormatError);
}

TEST(TableCsv, RejectsNonOneHotRows) {
  RngStream rng(17);
  auto t = random_table(3, 2, rng);
  t.indicator[0] = 1;
  t.indicator[1] = 1;
  testing::TempDir dir;
  save_table_csv(t, dir / "bad.csv");
  EXPECT_THROW(load_table_csv(dir / "bad.csv"), FormatError);
}

TEST(ComputeTable, DeterministicAndShaped) {
  RngStream rng(18);
  std::vector<SourceEncodings> enc;
  for (int s = 0; s < 2; ++s) {
    enc.push_back({gaussian_block(40, 3, s, rng), gaussian_block(20, 3, 0.0, rng),
                   gaussian_block(40, 3, s, rng), gaussian_block(20, 3, 0.0, rng)});
  }
  std::vector<std::string> ids;
  for (int r = 0; r < 20; ++r) ids.push_back("t" + std::to_string(r));
  const std::vector<std::string> sources{"a", "b"};
  const auto a = compute_table(ids, sources, enc, 5);
  const auto b = compute_table(ids, sources, enc, 5);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.num_docs(), 20u);
  for (double q : a.q) EXPECT_GT(q, 0.0);
  for (double c : a.cost) EXPECT_GE(c, 0.0);
}

}  // namespace
}  // namespace cepc::reliability
