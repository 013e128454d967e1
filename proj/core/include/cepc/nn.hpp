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

#ifndef CEPC_NN_HPP_
#define CEPC_NN_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cepc/matrix.hpp"
#include "cepc/rng.hpp"

namespace cepc::nn {

enum class Activation { kNone, kTanh };
enum class OutputHead { kNone, kSoftmax };

/// Layer widths from input to output. Hidden layers always use tanh;
/// `output_activation` applies to the last layer, `head` after it.
struct NetSpec {
  std::vector<std::size_t> widths;
  Activation output_activation = Activation::kNone;
  OutputHead head = OutputHead::kNone;

  bool operator==(const NetSpec&) const = default;
};

/// y = x * weight + bias, weight is (in x out), bias is (1 x out).
template <typename T>
struct Layer {
  BasicMatrix<T> weight;
  BasicMatrix<T> bias;

  bool operator==(const Layer&) const = default;
};

template <typename T>
struct BasicMlp {
  std::vector<Layer<T>> layers;
  Activation output_activation = Activation::kNone;
  OutputHead head = OutputHead::kNone;

  std::size_t input_width() const { return layers.front().weight.rows(); }
  std::size_t output_width() const { return layers.back().weight.cols(); }
  std::size_t parameter_count() const;
  NetSpec spec() const;

  template <typename U>
  BasicMlp<U> cast() const {
    BasicMlp<U> out;
    out.output_activation = output_activation;
    out.head = head;
    for (const auto& l : layers) {
      out.layers.push_back({l.weight.template cast<U>(),
                            l.bias.template cast<U>()});
    }
    return out;
  }

  bool operator==(const BasicMlp&) const = default;
};

using Mlp = BasicMlp<float>;

/// Everything the backward pass needs. `inputs[l]` is the input of layer l,
/// `logits` the last layer's pre-activation, `outputs` the final result.
template <typename T>
struct ForwardTrace {
  std::vector<BasicMatrix<T>> inputs;
  BasicMatrix<T> logits;
  BasicMatrix<T> outputs;
};

template <typename T>
struct MlpGrads {
  std::vector<Layer<T>> layers;
  BasicMatrix<T> input;

  static MlpGrads zeros_like(const BasicMlp<T>& net);
  void add(const MlpGrads& other, T scale = T{1});
};

/// Which quantity `upstream` in mlp_backward is the gradient of.
enum class GradWrt { kOutputs, kLogits };

template <typename T>
BasicMlp<T> init_params(const NetSpec& spec, RngStream& rng);

template <typename T>
ForwardTrace<T> mlp_forward(const BasicMlp<T>& net,
                            const BasicMatrix<T>& batch);

/// Gradients of all parameters and of the input. With `detached`, the
/// input gradient is returned as zeros so nothing flows to the producer.
template <typename T>
MlpGrads<T> mlp_backward(const BasicMlp<T>& net, const ForwardTrace<T>& trace,
                         const BasicMatrix<T>& upstream,
                         GradWrt wrt = GradWrt::kOutputs,
                         bool detached = false);

/// Row-wise softmax, evaluated in double.
template <typename T>
BasicMatrix<T> softmax(const BasicMatrix<T>& logits);

/// Maps a gradient w.r.t. softmax probabilities onto the logits.
template <typename T>
BasicMatrix<T> softmax_backward(const BasicMatrix<T>& probs,
                                const BasicMatrix<T>& grad_probs);

template <typename T>
struct NllResult {
  double loss = 0.0;
  BasicMatrix<T> grad;  // w.r.t. logits
};

/// Mean over rows of -log softmax(logits)[label].
template <typename T>
NllResult<T> softmax_nll(const BasicMatrix<T>& logits,
                         std::span<const int> labels);

/// Row-wise argmax; ties go to the lowest index.
template <typename T>
std::vector<int> argmax_rows(const BasicMatrix<T>& m);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

/// Moment accumulators are kept per parameter block, in double.
struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  bool operator==(const OptimizerState&) const = default;
};

template <typename T>
OptimizerState make_optimizer(const BasicMlp<T>& net, AdamConfig config = {});

/// Generic update over parameter blocks. Throws TrainingError on
/// non-finite gradients before touching any parameter.
template <typename T>
void adam_step(std::span<const std::span<T>> params,
               std::span<const std::span<const T>> grads,
               OptimizerState& state);

template <typename T>
void adam_step(BasicMlp<T>& net, const MlpGrads<T>& grads,
               OptimizerState& state);

template <typename T>
std::vector<std::span<T>> parameter_blocks(BasicMlp<T>& net);

template <typename T>
std::vector<std::span<const T>> parameter_blocks(const BasicMlp<T>& net);

template <typename T>
std::vector<std::span<const T>> gradient_blocks(const MlpGrads<T>& grads);

}  // namespace cepc::nn

#endif  // CEPC_NN_HPP_
