// Copyright 2026 The DQAD Authors. All rights reserved.
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

// Fully-connected action-value network for the two-action anomaly agent.
//
// Hidden layers use a rectifier; the two-unit output head is linear so that
// it can represent bootstrapped TD targets. Softmax is applied only when an
// anomaly score is requested (see metrics.hpp).

#ifndef DQAD_QNET_HPP_
#define DQAD_QNET_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dqad/random.hpp"

namespace dqad {

// a0 predicts "normal", a1 predicts "anomalous".
enum class Action : std::uint8_t { kNormal = 0, kAnomalous = 1 };

inline constexpr std::size_t kNumActions = 2;

template <typename T>
struct DenseLayer {
  std::size_t rows = 0;  // outputs
  std::size_t cols = 0;  // inputs
  std::vector<T> weights;  // rows x cols, row-major
  std::vector<T> biases;   // rows

  bool operator==(const DenseLayer&) const = default;
};

// Parameter-shaped storage: used for weights, gradients and optimizer
// accumulators alike.
template <typename T>
using ParamSet = std::vector<DenseLayer<T>>;

template <typename T>
ParamSet<T> ZerosLike(const ParamSet<T>& params);

template <typename T>
class BasicQNetwork {
 public:
  BasicQNetwork() = default;

  // Zero-initialized network. layer_sizes = {C, hidden..., 2}.
  explicit BasicQNetwork(std::span<const std::size_t> layer_sizes);

  // He-uniform weights, zero biases.
  static BasicQNetwork Initialized(std::span<const std::size_t> layer_sizes,
                                   Rng& rng);

  // Adopts explicit parameters after checking that the shapes chain.
  static BasicQNetwork FromLayers(ParamSet<T> layers);

  std::array<T, kNumActions> Forward(std::span<const float> state) const;

  // Post-rectifier activations of the last hidden layer.
  std::vector<T> Embed(std::span<const float> state) const;
  void EmbedInto(std::span<const float> state, std::span<T> out) const;

  std::size_t input_size() const;
  std::size_t embedding_size() const;
  std::size_t num_hidden_layers() const {
    return layers_.empty() ? 0 : layers_.size() - 1;
  }
  std::vector<std::size_t> layer_sizes() const;

  const ParamSet<T>& layers() const { return layers_; }
  ParamSet<T>& mutable_layers() { return layers_; }

  bool AllFinite() const;

  // FNV-1a over the raw parameter bytes.
  std::uint64_t Checksum() const;

  template <typename U>
  BasicQNetwork<U> Cast() const {
    ParamSet<U> out(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      out[l].rows = layers_[l].rows;
      out[l].cols = layers_[l].cols;
      out[l].weights.assign(layers_[l].weights.begin(), layers_[l].weights.end());
      out[l].biases.assign(layers_[l].biases.begin(), layers_[l].biases.end());
    }
    return BasicQNetwork<U>::FromLayers(std::move(out));
  }

  bool operator==(const BasicQNetwork&) const = default;

 private:
  void CheckInput(std::span<const float> state) const;

  ParamSet<T> layers_;
};

using QNetwork = BasicQNetwork<float>;
using QNetwork64 = BasicQNetwork<double>;

// r + gamma * max(next_q_target).
double TdTarget(double reward, double gamma, std::span<const double> next_q);

template <typename T>
double TdTarget(double reward, double gamma,
                const std::array<T, kNumActions>& next_q) {
  const std::array<double, kNumActions> q{static_cast<double>(next_q[0]),
                                          static_cast<double>(next_q[1])};
  return TdTarget(reward, gamma, std::span<const double>(q));
}

struct Transition;  // replay.hpp

enum class LossKind { kSquared, kHuber };

struct LossOptions {
  double gamma = 0.99;
  LossKind kind = LossKind::kSquared;
  double huber_delta = 1.0;
};

template <typename T>
struct LossAndGrads {
  double loss = 0.0;
  ParamSet<T> grads;
  std::vector<double> td_errors;
};

// Mean importance-weighted TD loss over the batch with exact gradients w.r.t.
// `net`. The target network only supplies bootstrap values.
template <typename T>
LossAndGrads<T> ComputeLossAndGrads(const BasicQNetwork<T>& net,
                                    const BasicQNetwork<T>& target_net,
                                    std::span<const Transition* const> batch,
                                    std::span<const double> is_weights,
                                    const LossOptions& options);

template <typename T>
LossAndGrads<T> ComputeLossAndGrads(const BasicQNetwork<T>& net,
                                    const BasicQNetwork<T>& target_net,
                                    std::span<const Transition> batch,
                                    std::span<const double> is_weights,
                                    const LossOptions& options);

struct RmsPropOptions {
  double learning_rate = 1e-3;
  double decay = 0.99;
  double epsilon = 1e-8;
};

template <typename T>
struct OptimizerState {
  RmsPropOptions options;
  ParamSet<T> accumulators;

  static OptimizerState For(const BasicQNetwork<T>& net, RmsPropOptions options) {
    return {options, ZerosLike(net.layers())};
  }
};

// accum <- decay*accum + (1-decay)*g^2 ; p <- p - lr*g/(sqrt(accum)+eps).
// Throws kNumeric if any parameter becomes non-finite.
template <typename T>
void RmsPropStep(BasicQNetwork<T>& net, OptimizerState<T>& opt,
                 const ParamSet<T>& grads);

template <typename T>
void SyncTarget(const BasicQNetwork<T>& source, BasicQNetwork<T>& target) {
  target = source;
}

// Checkpoint layout (little endian):
//   "DQADCKPT" | u16 version | u32 layer count
//   per layer: u32 rows | u32 cols | f32 weights[rows*cols] | f32 biases[rows]
//   then the optimizer accumulators in the same per-layer layout.
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  QNetwork net;
  ParamSet<float> accumulators;
};

std::string EncodeCheckpoint(const QNetwork& net, const ParamSet<float>& accumulators);
Checkpoint DecodeCheckpoint(std::string_view bytes, const std::string& source);
void SaveCheckpoint(const std::filesystem::path& path, const QNetwork& net,
                    const ParamSet<float>& accumulators);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace dqad

#endif  // DQAD_QNET_HPP_
