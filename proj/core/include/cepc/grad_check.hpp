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

#ifndef CEPC_GRAD_CHECK_HPP_
#define CEPC_GRAD_CHECK_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace cepc::nn {

struct ValueAndGrad {
  double value = 0.0;
  std::vector<double> grad;
};

using LossFn = std::function<ValueAndGrad(std::span<const double>)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Central finite differences with step `h` against the analytic gradient
/// returned by `loss`. The per-entry relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor); `floor` keeps
/// entries whose true gradient is zero from dividing by round-off.
GradCheckReport grad_check(const LossFn& loss, std::span<const double> params,
                           double tolerance, double h = 1e-4,
                           double floor = 1e-8);

}  // namespace cepc::nn

#endif  // CEPC_GRAD_CHECK_HPP_
