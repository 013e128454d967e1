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

#ifndef CEPC_LOSSES_HPP_
#define CEPC_LOSSES_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cepc/matrix.hpp"

namespace cepc::losses {

/// Probability floor applied to the second argument of every KL term.
inline constexpr double kProbFloor = 1e-7;

/// A loss value with gradients keyed by the role of each input tensor.
/// Roles listed in `detached` are treated as constants: they carry no
/// gradient entry even though the value depends on them.
template <typename T>
struct LossValue {
  double value = 0.0;
  std::map<std::string, BasicMatrix<T>> grads;
  std::set<std::string> detached;

  const BasicMatrix<T>& grad(const std::string& role) const;
};

/// Role names used by the pairing and medium losses.
std::string source_role(std::size_t k);
std::string medium_role(std::size_t e);

/// CORAL: (1 / 4d²) ‖Cov(src) − Cov(tgt)‖²_F with (n − 1) covariances.
/// Roles: "source", "target".
template <typename T>
LossValue<T> coral_loss(const BasicMatrix<T>& src_feats,
                        const BasicMatrix<T>& tgt_feats);

/// Row-wise KL(p ‖ q), natural log, q clamped at kProbFloor, 0 ln 0 = 0.
template <typename T>
std::vector<double> kl_rows(const BasicMatrix<T>& p, const BasicMatrix<T>& q);

/// Pairing objective for source `i`:
///   Σ_d I(i, d) Σ_{k≠i} KL(C_i(x_d) ‖ C_k(x_d)).
/// C_i is detached; gradients land on source_role(k) for k ≠ i.
template <typename T>
LossValue<T> divergence_psi(std::size_t i,
                            std::span<const BasicMatrix<T>> class_probs,
                            std::span<const std::uint8_t> indicator_col);

/// (Σ_i Ψ_i) / (M − 1).
double divergence_loss(std::span<const double> psis);

/// Same reduction, merging gradients. A role ends up detached only if no
/// term produced a gradient for it.
template <typename T>
LossValue<T> divergence_loss(std::span<const LossValue<T>> psis);

/// Medium-head objective:
///   (1 / (G·M)) Σ_e Σ_k mean_rows KL(C_k ‖ M_e)
/// with every source output C_k detached (teacher). Gradients land on
/// medium_role(e).
template <typename T>
LossValue<T> medium_loss(std::span<const BasicMatrix<T>> medium_probs,
                         std::span<const BasicMatrix<T>> source_probs);

}  // namespace cepc::losses

#endif  // CEPC_LOSSES_HPP_
