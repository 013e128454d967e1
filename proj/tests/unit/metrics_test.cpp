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

#include "cepc/metrics.hpp"

#include <vector>

#include <gtest/gtest.h>

#include "cepc/error.hpp"
#include "cepc/rng.hpp"

namespace cepc::eval {
namespace {

TEST(F1, PerfectPrediction) {
  const std::vector<int> y{1, 0, 1, 1, 0};
  EXPECT_EQ(f1_metrics(y, y), (F1Scores{1.0, 1.0, 1.0}));
}

TEST(F1, HandCounts) {
  // tp 2, fp 1, fn 1, tn 1
  const std::vector<int> gold{1, 1, 1, 0, 0};
  const std::vector<int> pred{1, 1, 0, 1, 0};
  const auto c = confusion(gold, pred);
  EXPECT_EQ(c.tp, 2u);
  EXPECT_EQ(c.fp, 1u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.tn, 1u);
  const auto s = f1_metrics(gold, pred);
  EXPECT_DOUBLE_EQ(s.f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.recall, 2.0 / 3.0);
}

TEST(F1, NoPredictedPositives) {
  EXPECT_EQ(f1_metrics(std::vector<int>{1, 0, 1}, std::vector<int>{0, 0, 0}),
            (F1Scores{0.0, 0.0, 0.0}));
}

TEST(F1, NoGoldPositivesButPredictedOnes) {
  EXPECT_EQ(f1_metrics(std::vector<int>{0, 0}, std::vector<int>{1, 0}),
            (F1Scores{0.0, 0.0, 0.0}));
}

TEST(F1, BothSidesAllNegative) {
  EXPECT_EQ(f1_metrics(std::vector<int>{0, 0, 0}, std::vector<int>{0, 0, 0}),
            (F1Scores{1.0, 1.0, 1.0}));
}

TEST(F1, RejectsBadInput) {
  EXPECT_THROW(confusion(std::vector<int>{1, 0}, std::vector<int>{1}), InputError);
  EXPECT_THROW(confusion(std::vector<int>{2}, std::vector<int>{1}), InputError);
  EXPECT_THROW(confusion(std::vector<int>{0}, std::vector<int>{-1}), InputError);
}

TEST(F1, SymmetricInF1ButNotPrecisionRecall) {
  RngStream rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> a(30), b(30);
    for (auto& v : a) v = rng.uniform01() < 0.3;
    for (auto& v : b) v = rng.uniform01() < 0.3;
    const auto ab = f1_metrics(a, b);
    const auto ba = f1_metrics(b, a);
    EXPECT_DOUBLE_EQ(ab.f1, ba.f1);
    EXPECT_DOUBLE_EQ(ab.precision, ba.recall);
  }
}

}  // namespace
}  // namespace cepc::eval
