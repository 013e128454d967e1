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

// Positive-class F1, precision and recall.

#ifndef CEPC_METRICS_HPP_
#define CEPC_METRICS_HPP_

#include <cstddef>
#include <span>

namespace cepc::eval {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
};

struct F1Scores {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;

  bool operator==(const F1Scores&) const = default;
};

/// Throws InputError on length mismatch or a label outside {0, 1}.
Confusion confusion(std::span<const int> gold, std::span<const int> pred);

/// Empty denominators give 0. When neither side has a positive the
/// prediction is perfect and all three scores are 1.
F1Scores f1_from_confusion(const Confusion& c);
F1Scores f1_metrics(std::span<const int> gold, std::span<const int> pred);

}  // namespace cepc::eval

#endif  // CEPC_METRICS_HPP_
