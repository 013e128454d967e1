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

#include "cepc/losses.hpp"

#include <algorithm>
#include <cmath>

namespace cepc::losses {

namespace {

constexpr double kRowSumTolerance = 1e-4;

template <typename T>
void check_probability_rows(const BasicMatrix<T>& m, const char* what) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (T v : m.row(r)) {
      if (!std::isfinite(v) || v < T{0}) {
        throw InputError(std::string(what) + ": row " + std::to_string(r) +
                         " has a negative or non-finite entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw InputError(std::string(what) + ": row " + std::to_string(r) +
                       " sums to " + std::to_string(sum));
    }
  }
}

// KL(p ‖ q̃) for one row, where q̃ is q clamped at kProbFloor and then
// renormalized; renormalizing keeps the divergence non-negative. When
// `grad_q` is non-empty it receives ∂KL/∂q (zero on clamped entries).
template <typename T>
double kl_row(std::span<const T> p, std::span<const T> q,
              std::span<double> grad_q) {
  double clamped_sum = 0.0;
  double p_sum = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    clamped_sum += std::max(static_cast<double>(q[j]), kProbFloor);
    p_sum += p[j];
  }
  double value = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double pj = p[j];
    if (pj <= 0.0) continue;
    const double cj = std::max(static_cast<double>(q[j]), kProbFloor);
    value += pj * (std::log(pj) - std::log(cj / clamped_sum));
  }
  if (!grad_q.empty()) {
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double qj = q[j];
      grad_q[j] = qj >= kProbFloor ? -p[j] / qj + p_sum / clamped_sum : 0.0;
    }
  }
  return value;
}

template <typename T>
void check_same_shapes(std::span<const BasicMatrix<T>> ms, const char* what) {
  for (const auto& m : ms) {
    if (!m.same_shape(ms.front())) {
      throw ShapeError(std::string(what) + ": probability blocks " +
                       shape_str(m) + " vs " + shape_str(ms.front()));
    }
  }
}

}  // namespace

template <typename T>
const BasicMatrix<T>& LossValue<T>::grad(const std::string& role) const {
  auto it = grads.find(role);
  if (it == grads.end()) {
    throw InputError("no gradient for role '" + role + "'");
  }
  return it->second;
}

std::string source_role(std::size_t k) { return "source/" + std::to_string(k); }
std::string medium_role(std::size_t e) { return "medium/" + std::to_string(e); }

template <typename T>
LossValue<T> coral_loss(const BasicMatrix<T>& src_feats,
                        const BasicMatrix<T>& tgt_feats) {
  if (src_feats.cols() != tgt_feats.cols() || src_feats.cols() == 0) {
    throw ShapeError("coral_loss: feature blocks " + shape_str(src_feats) +
                     " and " + shape_str(tgt_feats));
  }
  if (src_feats.rows() < 2 || tgt_feats.rows() < 2) {
    throw DegenerateError("coral_loss: each batch needs >= 2 rows");
  }
  const std::size_t d = src_feats.cols();
  const MatrixD cov_s = sample_covariance(src_feats);
  const MatrixD cov_t = sample_covariance(tgt_feats);
  MatrixD diff = cov_s;
  add_inplace(diff, cov_t, -1.0);

  const double dd = static_cast<double>(d) * static_cast<double>(d);
  double frob = 0.0;
  for (double v : diff.data()) frob += v * v;

  LossValue<T> out;
  out.value = frob / (4.0 * dd);

  auto side_grad = [&](const BasicMatrix<T>& x, double sign) {
    const auto mean = column_means(x);
    const double scale = sign / (dd * static_cast<double>(x.rows() - 1));
    BasicMatrix<T> g(x.rows(), d);
    std::vector<double> centered(d);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto row = x.row(r);
      for (std::size_t c = 0; c < d; ++c) centered[c] = row[c] - mean[c];
      for (std::size_t c = 0; c < d; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += centered[k] * diff(k, c);
        g(r, c) = static_cast<T>(acc * scale);
      }
    }
    return g;
  };
  out.grads.emplace("source", side_grad(src_feats, 1.0));
  out.grads.emplace("target", side_grad(tgt_feats, -1.0));
  return out;
}

template <typename T>
std::vector<double> kl_rows(const BasicMatrix<T>& p, const BasicMatrix<T>& q) {
  if (!p.same_shape(q)) {
    throw ShapeError("kl_rows: " + shape_str(p) + " vs " + shape_str(q));
  }
  check_probability_rows(p, "kl_rows(p)");
  check_probability_rows(q, "kl_rows(q)");
  std::vector<double> out(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    out[r] = kl_row<T>(p.row(r), q.row(r), {});
  }
  return out;
}

template <typename T>
LossValue<T> divergence_psi(std::size_t i,
                            std::span<const BasicMatrix<T>> class_probs,
                            std::span<const std::uint8_t> indicator_col) {
  const std::size_t sources = class_probs.size();
  if (sources < 2) {
    throw ConfigError("divergence_psi: needs >= 2 sources, got " +
                      std::to_string(sources));
  }
  if (i >= sources) {
    throw ConfigError("divergence_psi: source index " + std::to_string(i) +
                      " out of range");
  }
  check_same_shapes(class_probs, "divergence_psi");
  const std::size_t batch = class_probs.front().rows();
  const std::size_t classes = class_probs.front().cols();
  if (indicator_col.size() != batch) {
    throw ShapeError("divergence_psi: indicator length " +
                     std::to_string(indicator_col.size()) + " vs batch " +
                     std::to_string(batch));
  }
  for (std::uint8_t v : indicator_col) {
    if (v > 1) throw InputError("divergence_psi: indicator entries must be 0/1");
  }
  for (const auto& m : class_probs) check_probability_rows(m, "divergence_psi");

  LossValue<T> out;
  out.detached.insert(source_role(i));
  const auto& reliable = class_probs[i];
  std::vector<double> grad_row(classes);
  for (std::size_t k = 0; k < sources; ++k) {
    if (k == i) continue;
    BasicMatrix<T> g(batch, classes);
    for (std::size_t d = 0; d < batch; ++d) {
      if (indicator_col[d] == 0) continue;
      out.value += kl_row<T>(reliable.row(d), class_probs[k].row(d), grad_row);
      for (std::size_t j = 0; j < classes; ++j) {
        g(d, j) = static_cast<T>(grad_row[j]);
      }
    }
    out.grads.emplace(source_role(k), std::move(g));
  }
  return out;
}

double divergence_loss(std::span<const double> psis) {
  if (psis.size() < 2) {
    throw ConfigError("divergence_loss: needs >= 2 sources, got " +
                      std::to_string(psis.size()));
  }
  double sum = 0.0;
  for (double v : psis) sum += v;
  return sum / static_cast<double>(psis.size() - 1);
}

template <typename T>
LossValue<T> divergence_loss(std::span<const LossValue<T>> psis) {
  std::vector<double> values;
  for (const auto& p : psis) values.push_back(p.value);
  LossValue<T> out;
  out.value = divergence_loss(std::span<const double>(values));
  const T scale = static_cast<T>(1.0 / static_cast<double>(psis.size() - 1));
  for (const auto& p : psis) {
    for (const auto& [role, g] : p.grads) {
      auto it = out.grads.find(role);
      if (it == out.grads.end()) {
        BasicMatrix<T> scaled(g.rows(), g.cols());
        add_inplace(scaled, g, scale);
        out.grads.emplace(role, std::move(scaled));
      } else {
        add_inplace(it->second, g, scale);
      }
    }
  }
  for (const auto& p : psis) {
    for (const auto& role : p.detached) {
      if (!out.grads.contains(role)) out.detached.insert(role);
    }
  }
  return out;
}

template <typename T>
LossValue<T> medium_loss(std::span<const BasicMatrix<T>> medium_probs,
                         std::span<const BasicMatrix<T>> source_probs) {
  if (medium_probs.empty()) {
    throw ConfigError("medium_loss: no medium heads (G = 0)");
  }
  if (source_probs.empty()) {
    throw ConfigError("medium_loss: no source classifiers");
  }
  check_same_shapes(medium_probs, "medium_loss");
  check_same_shapes(source_probs, "medium_loss");
  if (!medium_probs.front().same_shape(source_probs.front())) {
    throw ShapeError("medium_loss: medium " + shape_str(medium_probs.front()) +
                     " vs source " + shape_str(source_probs.front()));
  }
  for (const auto& m : medium_probs) check_probability_rows(m, "medium_loss");
  for (const auto& m : source_probs) check_probability_rows(m, "medium_loss");

  const std::size_t groups = medium_probs.size();
  const std::size_t sources = source_probs.size();
  const std::size_t batch = medium_probs.front().rows();
  const std::size_t classes = medium_probs.front().cols();
  if (batch == 0) throw InputError("medium_loss: empty batch");
  const double scale = 1.0 / (static_cast<double>(groups) *
                              static_cast<double>(sources) *
                              static_cast<double>(batch));

  LossValue<T> out;
  std::vector<double> grad_row(classes);
  std::vector<double> acc(batch * classes);
  for (std::size_t e = 0; e < groups; ++e) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t k = 0; k < sources; ++k) {
      for (std::size_t d = 0; d < batch; ++d) {
        out.value += scale * kl_row<T>(source_probs[k].row(d),
                                       medium_probs[e].row(d), grad_row);
        for (std::size_t j = 0; j < classes; ++j) {
          acc[d * classes + j] += scale * grad_row[j];
        }
      }
    }
    BasicMatrix<T> g(batch, classes);
    for (std::size_t n = 0; n < acc.size(); ++n) {
      g.data()[n] = static_cast<T>(acc[n]);
    }
    out.grads.emplace(medium_role(e), std::move(g));
  }
  for (std::size_t k = 0; k < sources; ++k) out.detached.insert(source_role(k));
  return out;
}

#define CEPC_INSTANTIATE_LOSSES(T)                                            \
  template struct LossValue<T>;                                               \
  template LossValue<T> coral_loss<T>(const BasicMatrix<T>&,                  \
                                      const BasicMatrix<T>&);                 \
  template std::vector<double> kl_rows<T>(const BasicMatrix<T>&,             \
                                          const BasicMatrix<T>&);             \
  template LossValue<T> divergence_psi<T>(std::size_t,                        \
                                          std::span<const BasicMatrix<T>>,    \
                                          std::span<const std::uint8_t>);     \
  template LossValue<T> divergence_loss<T>(std::span<const LossValue<T>>);    \
  template LossValue<T> medium_loss<T>(std::span<const BasicMatrix<T>>,       \
                                       std::span<const BasicMatrix<T>>);

CEPC_INSTANTIATE_LOSSES(float)
CEPC_INSTANTIATE_LOSSES(double)

#undef CEPC_INSTANTIATE_LOSSES

}  // namespace cepc::losses
