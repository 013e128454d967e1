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

#include "cepc/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cepc::nn {

template <typename T>
std::size_t BasicMlp<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename T>
NetSpec BasicMlp<T>::spec() const {
  NetSpec s;
  s.output_activation = output_activation;
  s.head = head;
  if (layers.empty()) return s;
  s.widths.push_back(layers.front().weight.rows());
  for (const auto& l : layers) s.widths.push_back(l.weight.cols());
  return s;
}

template <typename T>
MlpGrads<T> MlpGrads<T>::zeros_like(const BasicMlp<T>& net) {
  MlpGrads g;
  for (const auto& l : net.layers) {
    g.layers.push_back({BasicMatrix<T>(l.weight.rows(), l.weight.cols()),
                        BasicMatrix<T>(1, l.bias.cols())});
  }
  return g;
}

template <typename T>
void MlpGrads<T>::add(const MlpGrads& other, T scale) {
  if (other.layers.size() != layers.size()) {
    throw ShapeError("gradient layer count mismatch");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    add_inplace(layers[l].weight, other.layers[l].weight, scale);
    add_inplace(layers[l].bias, other.layers[l].bias, scale);
  }
}

template <typename T>
BasicMlp<T> init_params(const NetSpec& spec, RngStream& rng) {
  if (spec.widths.size() < 2) {
    throw SpecError("network needs at least an input and an output width");
  }
  for (std::size_t w : spec.widths) {
    if (w == 0) throw SpecError("zero-width layer in network spec");
  }
  BasicMlp<T> net;
  net.output_activation = spec.output_activation;
  net.head = spec.head;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::size_t fan_in = spec.widths[l];
    const std::size_t fan_out = spec.widths[l + 1];
    const double bound =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer<T> layer{BasicMatrix<T>(fan_in, fan_out),
                   BasicMatrix<T>(1, fan_out)};
    for (T& w : layer.weight.data()) {
      w = static_cast<T>(rng.uniform(-bound, bound));
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

template <typename T>
BasicMatrix<T> softmax(const BasicMatrix<T>& logits) {
  BasicMatrix<T> out(logits.rows(), logits.cols());
  std::vector<double> e(logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      e[c] = std::exp(static_cast<double>(row[c]) - mx);
      sum += e[c];
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      out(r, c) = static_cast<T>(e[c] / sum);
    }
  }
  return out;
}

template <typename T>
BasicMatrix<T> softmax_backward(const BasicMatrix<T>& probs,
                                const BasicMatrix<T>& grad_probs) {
  if (!probs.same_shape(grad_probs)) {
    throw ShapeError("softmax_backward " + shape_str(probs) + " vs " +
                     shape_str(grad_probs));
  }
  BasicMatrix<T> out(probs.rows(), probs.cols());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto p = probs.row(r);
    const auto g = grad_probs.row(r);
    double dot = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      dot += static_cast<double>(p[c]) * g[c];
    }
    for (std::size_t c = 0; c < p.size(); ++c) {
      out(r, c) = static_cast<T>(p[c] * (g[c] - dot));
    }
  }
  return out;
}

template <typename T>
ForwardTrace<T> mlp_forward(const BasicMlp<T>& net,
                            const BasicMatrix<T>& batch) {
  if (net.layers.empty()) throw SpecError("empty network");
  if (batch.cols() != net.input_width()) {
    throw ShapeError("mlp_forward: batch has " + std::to_string(batch.cols()) +
                     " columns, network expects " +
                     std::to_string(net.input_width()));
  }
  if (!batch.all_finite()) {
    throw InputError("mlp_forward: non-finite input");
  }
  ForwardTrace<T> trace;
  trace.inputs.reserve(net.layers.size());
  BasicMatrix<T> current = batch;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    BasicMatrix<T> z = matmul(current, layer.weight);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto row = z.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias(0, c);
    }
    trace.inputs.push_back(std::move(current));
    const bool last = l + 1 == net.layers.size();
    if (last) {
      trace.logits = z;
      if (net.output_activation == Activation::kTanh) {
        for (T& v : z.data()) v = std::tanh(v);
      }
      current = std::move(z);
    } else {
      for (T& v : z.data()) v = std::tanh(v);
      current = std::move(z);
    }
  }
  trace.outputs =
      net.head == OutputHead::kSoftmax ? softmax(current) : std::move(current);
  return trace;
}

template <typename T>
MlpGrads<T> mlp_backward(const BasicMlp<T>& net, const ForwardTrace<T>& trace,
                         const BasicMatrix<T>& upstream, GradWrt wrt,
                         bool detached) {
  if (trace.inputs.size() != net.layers.size()) {
    throw ShapeError("mlp_backward: trace does not belong to this network");
  }
  const BasicMatrix<T>& reference =
      wrt == GradWrt::kOutputs ? trace.outputs : trace.logits;
  if (!upstream.same_shape(reference)) {
    throw ShapeError("mlp_backward: upstream " + shape_str(upstream) +
                     " vs output " + shape_str(reference));
  }

  BasicMatrix<T> grad_z;
  if (wrt == GradWrt::kLogits) {
    grad_z = upstream;
  } else {
    BasicMatrix<T> grad_act = net.head == OutputHead::kSoftmax
                                  ? softmax_backward(trace.outputs, upstream)
                                  : upstream;
    if (net.output_activation == Activation::kTanh) {
      auto g = grad_act.data();
      auto z = trace.logits.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T t = std::tanh(z[i]);
        g[i] *= T{1} - t * t;
      }
    }
    grad_z = std::move(grad_act);
  }

  MlpGrads<T> grads;
  grads.layers.resize(net.layers.size());
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const auto& layer = net.layers[li];
    const auto& input = trace.inputs[li];
    grads.layers[li].weight = matmul_at_b(input, grad_z);
    BasicMatrix<T> bias_grad(1, grad_z.cols());
    for (std::size_t c = 0; c < grad_z.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < grad_z.rows(); ++r) acc += grad_z(r, c);
      bias_grad(0, c) = static_cast<T>(acc);
    }
    grads.layers[li].bias = std::move(bias_grad);

    if (li == 0) {
      grads.input = detached ? BasicMatrix<T>(input.rows(), input.cols())
                             : matmul_a_bt(grad_z, layer.weight);
    } else {
      // input of layer li is tanh of the previous layer's pre-activation.
      BasicMatrix<T> grad_a = matmul_a_bt(grad_z, layer.weight);
      auto g = grad_a.data();
      auto a = input.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= T{1} - a[i] * a[i];
      grad_z = std::move(grad_a);
    }
  }
  return grads;
}

template <typename T>
NllResult<T> softmax_nll(const BasicMatrix<T>& logits,
                         std::span<const int> labels) {
  if (logits.rows() != labels.size()) {
    throw ShapeError("softmax_nll: " + std::to_string(logits.rows()) +
                     " rows vs " + std::to_string(labels.size()) + " labels");
  }
  if (logits.rows() == 0) throw InputError("softmax_nll: empty batch");
  const std::size_t classes = logits.cols();
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InputError("softmax_nll: label " + std::to_string(y) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
  }
  NllResult<T> result;
  result.grad = BasicMatrix<T>(logits.rows(), classes);
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  std::vector<double> e(classes);
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      e[c] = std::exp(static_cast<double>(row[c]) - mx);
      sum += e[c];
    }
    const auto y = static_cast<std::size_t>(labels[r]);
    total += std::log(sum) + mx - static_cast<double>(row[y]);
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = e[c] / sum;
      result.grad(r, c) =
          static_cast<T>((p - (c == y ? 1.0 : 0.0)) * inv_n);
    }
  }
  result.loss = total * inv_n;
  return result;
}

template <typename T>
std::vector<int> argmax_rows(const BasicMatrix<T>& m) {
  std::vector<int> out(m.rows(), 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

template <typename T>
std::vector<std::span<T>> parameter_blocks(BasicMlp<T>& net) {
  std::vector<std::span<T>> blocks;
  for (auto& l : net.layers) {
    blocks.push_back(l.weight.data());
    blocks.push_back(l.bias.data());
  }
  return blocks;
}

template <typename T>
std::vector<std::span<const T>> parameter_blocks(const BasicMlp<T>& net) {
  std::vector<std::span<const T>> blocks;
  for (const auto& l : net.layers) {
    blocks.push_back(l.weight.data());
    blocks.push_back(l.bias.data());
  }
  return blocks;
}

template <typename T>
std::vector<std::span<const T>> gradient_blocks(const MlpGrads<T>& grads) {
  std::vector<std::span<const T>> blocks;
  for (const auto& l : grads.layers) {
    blocks.push_back(l.weight.data());
    blocks.push_back(l.bias.data());
  }
  return blocks;
}

template <typename T>
OptimizerState make_optimizer(const BasicMlp<T>& net, AdamConfig config) {
  OptimizerState state;
  state.config = config;
  for (auto block : parameter_blocks(net)) {
    state.first_moment.emplace_back(block.size(), 0.0);
    state.second_moment.emplace_back(block.size(), 0.0);
  }
  return state;
}

template <typename T>
void adam_step(std::span<const std::span<T>> params,
               std::span<const std::span<const T>> grads,
               OptimizerState& state) {
  if (params.size() != grads.size() ||
      params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: parameter/gradient/state block mismatch");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() ||
        params[b].size() != state.first_moment[b].size()) {
      throw ShapeError("adam_step: block " + std::to_string(b) +
                       " size mismatch");
    }
    for (T g : grads[b]) {
      if (!std::isfinite(g)) {
        throw TrainingError("adam_step: non-finite gradient in block " +
                            std::to_string(b) + " at step " +
                            std::to_string(state.step + 1));
      }
    }
  }
  const AdamConfig& cfg = state.config;
  const std::uint64_t t = state.step + 1;
  const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      const double updated = static_cast<double>(params[b][i]) -
                             cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
      params[b][i] = static_cast<T>(updated);
    }
  }
  state.step = t;
}

template <typename T>
void adam_step(BasicMlp<T>& net, const MlpGrads<T>& grads,
               OptimizerState& state) {
  const auto p = parameter_blocks(net);
  const auto g = gradient_blocks(grads);
  adam_step<T>(std::span<const std::span<T>>(p),
               std::span<const std::span<const T>>(g), state);
}

#define CEPC_INSTANTIATE_NN(T)                                              \
  template struct BasicMlp<T>;                                              \
  template struct MlpGrads<T>;                                              \
  template BasicMlp<T> init_params<T>(const NetSpec&, RngStream&);          \
  template ForwardTrace<T> mlp_forward<T>(const BasicMlp<T>&,               \
                                          const BasicMatrix<T>&);           \
  template MlpGrads<T> mlp_backward<T>(const BasicMlp<T>&,                  \
                                       const ForwardTrace<T>&,              \
                                       const BasicMatrix<T>&, GradWrt,      \
                                       bool);                               \
  template BasicMatrix<T> softmax<T>(const BasicMatrix<T>&);                \
  template BasicMatrix<T> softmax_backward<T>(const BasicMatrix<T>&,        \
                                              const BasicMatrix<T>&);       \
  template NllResult<T> softmax_nll<T>(const BasicMatrix<T>&,               \
                                       std::span<const int>);               \
  template std::vector<int> argmax_rows<T>(const BasicMatrix<T>&);          \
  template std::vector<std::span<T>> parameter_blocks<T>(BasicMlp<T>&);     \
  template std::vector<std::span<const T>> parameter_blocks<T>(             \
      const BasicMlp<T>&);                                                  \
  template std::vector<std::span<const T>> gradient_blocks<T>(              \
      const MlpGrads<T>&);                                                  \
  template OptimizerState make_optimizer<T>(const BasicMlp<T>&, AdamConfig); \
  template void adam_step<T>(std::span<const std::span<T>>,                 \
                             std::span<const std::span<const T>>,           \
                             OptimizerState&);                              \
  template void adam_step<T>(BasicMlp<T>&, const MlpGrads<T>&,              \
                             OptimizerState&);

CEPC_INSTANTIATE_NN(float)
CEPC_INSTANTIATE_NN(double)

#undef CEPC_INSTANTIATE_NN

}  // namespace cepc::nn
