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

#include "cepc/coordination.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "cepc/error.hpp"
#include "cepc/io_util.hpp"
#include "cepc/metrics.hpp"
#include "test_util.hpp"

namespace cepc::coord {
namespace {

using data::DomainDataset;

SingleSourceRun fake_run(const std::string& source, double lambda, std::size_t repeat,
                         std::vector<int> labels, double js) {
  SingleSourceRun r;
  r.source = source;
  r.lambda = lambda;
  r.repeat = repeat;
  r.seed = 100 + repeat;
  r.pseudo_labels = std::move(labels);
  r.js_to_source = js;
  return r;
}

TEST(PairwiseAgreement, IdenticalSets) {
  const std::vector<std::vector<int>> sets(3, std::vector<int>{1, 0, 1, 0});
  EXPECT_DOUBLE_EQ(pairwise_agreement(sets), 6.0);
}

TEST(PairwiseAgreement, HandCase) {
  const std::vector<std::vector<int>> sets{{1, 1, 0, 0}, {1, 0, 0, 0}};
  EXPECT_NEAR(pairwise_agreement(sets), 4.0 / 3.0, 1e-12);
}

TEST(PairwiseAgreement, DisjointPositives) {
  const std::vector<std::vector<int>> sets{{1, 1, 0, 0}, {0, 0, 1, 1}};
  EXPECT_EQ(pairwise_agreement(sets), 0.0);
  EXPECT_THROW(pairwise_agreement(std::vector<std::vector<int>>{{1}}), InputError);
}

TEST(JsDistance, KnownValues) {
  const std::vector<double> a{1, 0}, b{0, 1}, u{0.5, 0.5}, p{0.3, 0.7};
  EXPECT_EQ(js_distance(p, p), 0.0);
  EXPECT_NEAR(js_distance(a, b), 1.0, 1e-12);
  EXPECT_NEAR(js_distance(a, u), 0.5579, 1e-4);
  EXPECT_NEAR(js_distance(a, u) * js_distance(a, u), 0.3113, 1e-4);
  EXPECT_DOUBLE_EQ(js_distance(a, u), js_distance(u, a));
}

TEST(JsDistance, RejectsNonDistributions) {
  const std::vector<double> a{0.5, 0.6}, b{0.5, 0.5}, c{1.0};
  EXPECT_THROW(js_distance(a, b), InputError);
  EXPECT_THROW(js_distance(b, c), InputError);
}

TEST(SelectLambdas, IdenticalLabelsKeepJsMinimum) {
  const LambdaGrid grid;
  const std::vector<std::string> sources{"a", "b", "c"};
  const std::vector<int> labels{1, 0, 0, 1, 0};
  std::vector<SingleSourceRun> runs;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t k = 0; k < grid.values.size(); ++k) {
      for (std::size_t r = 0; r < 2; ++r) {
        // JS minimum sits at a different grid index per source.
        const double js = std::abs(static_cast<double>(k) - static_cast<double>(s + 1)) * 0.1;
        runs.push_back(fake_run(sources[s], grid.values[k], r, labels, js));
      }
    }
  }
  const auto plan = select_lambdas(runs, sources, grid, 2);
  EXPECT_EQ(plan.lambda_star.at("a"), grid.values[1]);
  EXPECT_EQ(plan.lambda_star.at("b"), grid.values[2]);
  EXPECT_EQ(plan.lambda_star.at("c"), grid.values[3]);
  EXPECT_DOUBLE_EQ(plan.corr_initial, 1.0);
  EXPECT_DOUBLE_EQ(plan.corr_final, 1.0);
  EXPECT_EQ(plan.groups.size(), 3u);
  EXPECT_EQ(plan.training_calls, runs.size());
  EXPECT_EQ(plan.seeds, (std::vector<std::uint64_t>{100, 101}));
}

TEST(SelectLambdas, JsTiesKeepGridOrder) {
  const LambdaGrid grid;
  const std::vector<std::string> sources{"a", "b"};
  std::vector<SingleSourceRun> runs;
  for (const auto& s : sources) {
    for (double l : grid.values) runs.push_back(fake_run(s, l, 0, {1, 0}, 0.25));
  }
  const auto plan = select_lambdas(runs, sources, grid, 1);
  EXPECT_EQ(plan.lambda_star.at("a"), 1.0);
  EXPECT_EQ(plan.lambda_star.at("b"), 1.0);
  EXPECT_EQ(plan.groups.size(), 1u);
}

TEST(SelectLambdas, MovesOffDegenerateCell) {
  // a at λ=1 is closest in JS but predicts everything positive; a at 0.1
  // matches b exactly.
  LambdaGrid grid;
  grid.values = {1.0, 0.1};
  const std::vector<int> agree{1, 0, 0, 0, 0, 1, 0, 0, 0, 0};
  const std::vector<int> all_pos(10, 1);
  std::vector<SingleSourceRun> runs{
      fake_run("a", 1.0, 0, all_pos, 0.1), fake_run("a", 0.1, 0, agree, 0.2),
      fake_run("b", 1.0, 0, agree, 0.1), fake_run("b", 0.1, 0, agree, 0.2)};
  const std::vector<std::string> sources{"a", "b"};
  const auto plan = select_lambdas(runs, sources, grid, 1);
  EXPECT_EQ(plan.lambda_star.at("a"), 0.1);
  EXPECT_EQ(plan.lambda_star.at("b"), 1.0);
  EXPECT_NEAR(plan.corr_initial, 1.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(plan.corr_final, 1.0);
}

TEST(SelectLambdas, SmallGainsBelowThresholdIgnored) {
  LambdaGrid grid;
  grid.values = {1.0, 0.1};
  // Moving a to 0.1 raises normalized Corr by less than 0.005.
  std::vector<int> b_labels(400, 0), a_near(400, 0), a_far(400, 0);
  for (int i = 0; i < 100; ++i) b_labels[i] = a_near[i] = a_far[i] = 1;
  a_far[100] = 1;  // one extra false positive
  std::vector<SingleSourceRun> runs{
      fake_run("a", 1.0, 0, a_far, 0.1), fake_run("a", 0.1, 0, a_near, 0.2),
      fake_run("b", 1.0, 0, b_labels, 0.1), fake_run("b", 0.1, 0, b_labels, 0.2)};
  const std::vector<std::string> sources{"a", "b"};
  const auto plan = select_lambdas(runs, sources, grid, 1);
  EXPECT_LT(plan.corr_initial, 1.0);
  EXPECT_GT(plan.corr_initial, 1.0 - 0.005);
  EXPECT_EQ(plan.lambda_star.at("a"), 1.0);
}

TEST(SelectLambdas, MissingCellIsConfigError) {
  const LambdaGrid grid;
  std::vector<SingleSourceRun> runs{fake_run("a", 1.0, 0, {1, 0}, 0.1)};
  const std::vector<std::string> sources{"a"};
  EXPECT_THROW(select_lambdas(runs, sources, grid, 1), ConfigError);
}

TEST(GroupEncoders, EqualityClasses) {
  const std::vector<std::string> s{"S1", "S2", "S3"};
  EXPECT_EQ(group_encoders(s, {{"S1", 0.1}, {"S2", 0.1}, {"S3", 1.0}}),
            (std::vector<std::vector<std::string>>{{"S1", "S2"}, {"S3"}}));
  EXPECT_EQ(group_encoders(s, {{"S1", 1.0}, {"S2", 1.0}, {"S3", 1.0}}).size(), 1u);
  EXPECT_EQ(group_encoders(s, {{"S1", 1.0}, {"S2", 0.1}, {"S3", 0.01}}).size(), 3u);
  EXPECT_EQ(group_encoders(s, {{"S1", 1.0}, {"S2", 0.1}, {"S3", 1.0}}),
            (std::vector<std::vector<std::string>>{{"S1", "S3"}, {"S2"}}));
  EXPECT_THROW(group_encoders(s, {{"S1", 1.0}}), ConfigError);
}

TEST(LambdaGrid, Validation) {
  LambdaGrid g;
  EXPECT_NO_THROW(g.validate());
  EXPECT_EQ(g.index_of(0.01), 2u);
  EXPECT_THROW(g.index_of(0.5), ConfigError);
  g.values = {1.0, 1.0};
  EXPECT_THROW(g.validate(), ConfigError);
  g.values = {0.0};
  EXPECT_THROW(g.validate(), ConfigError);
  g.values = {};
  EXPECT_THROW(g.validate(), ConfigError);
}

train::TrainConfig small_config(std::uint64_t seed = 1) {
  train::TrainConfig cfg;
  cfg.batch_size = 20;
  cfg.epochs = 3;
  cfg.classifier_hidden = 16;
  cfg.lr = 1e-2;
  cfg.seed = seed;
  return cfg;
}

TEST(TrainSingleSource, DeterministicPseudoLabels) {
  const auto c = testing::small_corpus(3, 100, 4);
  const auto a = train_single_source(c.sources[0], c.target, 0.1, small_config(5));
  const auto b = train_single_source(c.sources[0], c.target, 0.1, small_config(5));
  EXPECT_EQ(a.pseudo_labels, b.pseudo_labels);
  EXPECT_EQ(a.source_encodings, b.source_encodings);
  EXPECT_EQ(a.pseudo_labels.size(), c.target.size());
  EXPECT_NEAR(a.source_distribution[1], 0.2, 1e-12);
}

TEST(TrainSingleSource, CopiedTargetAlignsAndLabelsWell) {
  RngStream rng(8);
  const auto src = testing::blob_dataset("src", 400, 4, 3.0, 200, rng);
  const auto tgt = data::strip_labels(src);
  auto cfg = small_config(2);
  cfg.epochs = 10;
  const auto run = train_single_source(src, tgt, 1.0, cfg);
  EXPECT_LT(run.trace.back().coral, 0.05);
  EXPECT_GE(eval::f1_metrics(src.labels, run.pseudo_labels).f1, 0.95);
}

TEST(TrainSingleSource, EncodingsOptional) {
  const auto c = testing::small_corpus(4, 60, 4);
  const auto run = train_single_source(c.sources[0], c.target, 1.0, small_config(), false);
  EXPECT_TRUE(run.source_encodings.empty());
  EXPECT_TRUE(run.target_encodings.empty());
}

TEST(RepeatSeed, IndependentOfLambdaAndDistinctPerRepeat) {
  EXPECT_EQ(repeat_seed(7, 0), repeat_seed(7, 0));
  EXPECT_NE(repeat_seed(7, 0), repeat_seed(7, 1));
  EXPECT_NE(repeat_seed(7, 0), repeat_seed(8, 0));
}

TEST(RunCoordination, PlanCoversGridAndRoundTrips) {
  const auto c = testing::small_corpus(5, 60, 4);
  CoordinationConfig cc;
  cc.grid.values = {1.0, 0.01};
  cc.repeats = 2;
  const auto result = run_coordination(c.sources, c.target, cc, small_config(3));
  EXPECT_EQ(result.runs.size(), 2u * 2u * 2u);
  EXPECT_EQ(result.plan.training_calls, 8u);
  EXPECT_EQ(result.plan.cells.size(), 4u);
  for (const auto& run : result.runs) {
    EXPECT_EQ(run.seed, repeat_seed(3, run.repeat));
    EXPECT_EQ(run.source_encodings.empty(), run.repeat != 0);
  }
  testing::TempDir dir;
  save_plan(result.plan, dir / "plan.json");
  const auto back = load_plan(dir / "plan.json");
  EXPECT_EQ(to_json(back), to_json(result.plan));
  EXPECT_EQ(back.group_of(), result.plan.group_of());
}

TEST(Plan, RejectsGroupsInconsistentWithLambdas) {
  CoordinationPlan plan;
  plan.sources = {"a", "b"};
  plan.grid = {1.0, 0.1};
  plan.repeats = 1;
  plan.seeds = {1};
  plan.lambda_star = {{"a", 1.0}, {"b", 0.1}};
  plan.groups = {{"a", "b"}};
  EXPECT_THROW(plan_from_json(to_json(plan)), ConfigError);
  plan.groups = {{"a"}, {"b"}};
  EXPECT_NO_THROW(plan_from_json(to_json(plan)));
  EXPECT_EQ(plan.lambdas(), (std::vector<double>{1.0, 0.1}));
}

TEST(CoordinationConfig, JsonRoundTripAndValidation) {
  CoordinationConfig c;
  c.repeats = 3;
  c.grid.values = {0.5, 0.05};
  const auto back = coordination_config_from_json(to_json(c));
  EXPECT_EQ(back.repeats, 3u);
  EXPECT_EQ(back.grid.values, c.grid.values);
  EXPECT_THROW(coordination_config_from_json({{"repeats", 0}}), ConfigError);
  EXPECT_THROW(coordination_config_from_json({{"grid", {1.0, -1.0}}}), ConfigError);
}

}  // namespace
}  // namespace cepc::coord
