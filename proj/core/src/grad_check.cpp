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

#include "cepc/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "cepc/error.hpp"

namespace cepc::nn {

GradCheckReport grad_check(const LossFn& loss, std::span<const double> params,
                           double tolerance, double h, double floor) {
  std::vector<double> point(params.begin(), params.end());
  const ValueAndGrad base = loss(point);
  if (base.grad.size() != point.size()) {
    throw ShapeError("grad_check: gradient has " +
                     std::to_string(base.grad.size()) + " entries for " +
                     std::to_string(point.size()) + " parameters");
  }
  GradCheckReport report;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double original = point[i];
    point[i] = original + h;
    const double plus = loss(point).value;
    point[i] = original - h;
    const double minus = loss(point).value;
    point[i] = original;
    const double numeric = (plus - minus) / (2.0 * h);
    const double analytic = base.grad[i];
    const double scale =
        std::max({std::abs(analytic), std::abs(numeric), floor});
    const double rel = std::abs(analytic - numeric) / scale;
    if (!(rel <= report.max_relative_error)) {
      report.max_relative_error = rel;
      report.worst_index = i;
    }
    ++report.checked;
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace cepc::nn
