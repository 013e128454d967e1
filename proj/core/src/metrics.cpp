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

#include <string>

#include "cepc/error.hpp"

namespace cepc::eval {

Confusion confusion(std::span<const int> gold, std::span<const int> pred) {
  if (gold.size() != pred.size()) {
    throw InputError("f1: gold has " + std::to_string(gold.size()) +
                     " labels, prediction has " + std::to_string(pred.size()));
  }
  Confusion c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int g = gold[i];
    const int p = pred[i];
    if ((g != 0 && g != 1) || (p != 0 && p != 1)) {
      throw InputError("f1: non-binary label at position " + std::to_string(i));
    }
    if (g == 1) {
      (p == 1 ? c.tp : c.fn) += 1;
    } else {
      (p == 1 ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

F1Scores f1_from_confusion(const Confusion& c) {
  if (c.tp + c.fp + c.fn == 0) return {1.0, 1.0, 1.0};
  F1Scores s;
  if (c.tp + c.fp > 0) {
    s.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  if (c.tp + c.fn > 0) {
    s.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  }
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

F1Scores f1_metrics(std::span<const int> gold, std::span<const int> pred) {
  return f1_from_confusion(confusion(gold, pred));
}

}  // namespace cepc::eval
