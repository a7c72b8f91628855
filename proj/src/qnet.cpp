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

#include "dqad/qnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "dqad/binary_io.hpp"
#include "dqad/error.hpp"
#include "dqad/replay.hpp"

namespace dqad {
namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void CheckLayerSizes(std::span<const std::size_t> sizes) {
  Require(sizes.size() >= 2, ErrorKind::kConfig,
          "network needs at least an input and an output layer");
  for (std::size_t s : sizes) {
    Require(s > 0, ErrorKind::kConfig, "layer sizes must be positive");
  }
  Require(sizes.back() == kNumActions, ErrorKind::kConfig,
          "network output dimension must be 2");
}

// out = W * in + b, optionally rectified.
template <typename T>
void Dense(const DenseLayer<T>& layer, const T* in, T* out, bool rectify) {
  for (std::size_t r = 0; r < layer.rows; ++r) {
    const T* w = layer.weights.data() + r * layer.cols;
    T acc = layer.biases[r];
    for (std::size_t c = 0; c < layer.cols; ++c) acc += w[c] * in[c];
    out[r] = rectify ? std::max(acc, T(0)) : acc;
  }
}

template <typename T>
bool Finite(const std::vector<T>& values) {
  return std::all_of(values.begin(), values.end(),
                     [](T v) { return std::isfinite(v); });
}

}  // namespace

template <typename T>
ParamSet<T> ZerosLike(const ParamSet<T>& params) {
  ParamSet<T> out(params.size());
  for (std::size_t l = 0; l < params.size(); ++l) {
    out[l].rows = params[l].rows;
    out[l].cols = params[l].cols;
    out[l].weights.assign(params[l].weights.size(), T(0));
    out[l].biases.assign(params[l].biases.size(), T(0));
  }
  return out;
}

template <typename T>
BasicQNetwork<T>::BasicQNetwork(std::span<const std::size_t> layer_sizes) {
  CheckLayerSizes(layer_sizes);
  layers_.resize(layer_sizes.size() - 1);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    layers_[l].cols = layer_sizes[l];
    layers_[l].rows = layer_sizes[l + 1];
    layers_[l].weights.assign(layers_[l].rows * layers_[l].cols, T(0));
    layers_[l].biases.assign(layers_[l].rows, T(0));
  }
}

template <typename T>
BasicQNetwork<T> BasicQNetwork<T>::Initialized(std::span<const std::size_t> layer_sizes,
                                               Rng& rng) {
  BasicQNetwork net(layer_sizes);
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    DenseLayer<T>& layer = net.layers_[l];
    const bool hidden = l + 1 < net.layers_.size();
    const double limit =
        std::sqrt((hidden ? 6.0 : 3.0) / static_cast<double>(layer.cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (T& w : layer.weights) w = static_cast<T>(dist(rng));
  }
  return net;
}

template <typename T>
BasicQNetwork<T> BasicQNetwork<T>::FromLayers(ParamSet<T> layers) {
  Require(!layers.empty(), ErrorKind::kConfig, "network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer<T>& layer = layers[l];
    Require(layer.rows > 0 && layer.cols > 0, ErrorKind::kConfig,
            "layer " + std::to_string(l) + " has an empty shape");
    Require(layer.weights.size() == layer.rows * layer.cols &&
                layer.biases.size() == layer.rows,
            ErrorKind::kConfig,
            "layer " + std::to_string(l) + " storage does not match its shape");
    if (l > 0) {
      Require(layers[l - 1].rows == layer.cols, ErrorKind::kConfig,
              "layer " + std::to_string(l) + " input does not chain");
    }
  }
  Require(layers.back().rows == kNumActions, ErrorKind::kConfig,
          "network output dimension must be 2");
  BasicQNetwork net;
  net.layers_ = std::move(layers);
  return net;
}

template <typename T>
void BasicQNetwork<T>::CheckInput(std::span<const float> state) const {
  Require(!layers_.empty(), ErrorKind::kState, "network is empty");
  Require(state.size() == layers_.front().cols, ErrorKind::kInput,
          "state dimension " + std::to_string(state.size()) +
              " does not match network input " + std::to_string(layers_.front().cols));
}

template <typename T>
std::array<T, kNumActions> BasicQNetwork<T>::Forward(std::span<const float> state) const {
  CheckInput(state);
  std::vector<T> a(state.begin(), state.end());
  std::vector<T> b;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    b.resize(layers_[l].rows);
    Dense(layers_[l], a.data(), b.data(), l + 1 < layers_.size());
    a.swap(b);
  }
  return {a[0], a[1]};
}

template <typename T>
void BasicQNetwork<T>::EmbedInto(std::span<const float> state, std::span<T> out) const {
  CheckInput(state);
  Require(num_hidden_layers() > 0, ErrorKind::kConfig,
          "embedding undefined for a network without hidden layers");
  Require(out.size() == embedding_size(), ErrorKind::kInput,
          "embedding buffer has wrong size");
  std::vector<T> a(state.begin(), state.end());
  std::vector<T> b;
  const std::size_t hidden = num_hidden_layers();
  for (std::size_t l = 0; l < hidden; ++l) {
    b.resize(layers_[l].rows);
    Dense(layers_[l], a.data(), b.data(), true);
    a.swap(b);
  }
  std::copy(a.begin(), a.end(), out.begin());
}

template <typename T>
std::vector<T> BasicQNetwork<T>::Embed(std::span<const float> state) const {
  Require(num_hidden_layers() > 0, ErrorKind::kConfig,
          "embedding undefined for a network without hidden layers");
  std::vector<T> out(embedding_size());
  EmbedInto(state, out);
  return out;
}

template <typename T>
std::size_t BasicQNetwork<T>::input_size() const {
  return layers_.empty() ? 0 : layers_.front().cols;
}

template <typename T>
std::size_t BasicQNetwork<T>::embedding_size() const {
  return num_hidden_layers() == 0 ? 0 : layers_[layers_.size() - 2].rows;
}

template <typename T>
std::vector<std::size_t> BasicQNetwork<T>::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(layers_.front().cols);
  for (const auto& layer : layers_) sizes.push_back(layer.rows);
  return sizes;
}

template <typename T>
bool BasicQNetwork<T>::AllFinite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const DenseLayer<T>& l) {
    return Finite(l.weights) && Finite(l.biases);
  });
}

template <typename T>
std::uint64_t BasicQNetwork<T>::Checksum() const {
  std::uint64_t h = kFnvOffset;
  auto mix = [&h](const std::vector<T>& values) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
    for (std::size_t i = 0; i < values.size() * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= kFnvPrime;
    }
  };
  for (const auto& layer : layers_) {
    mix(layer.weights);
    mix(layer.biases);
  }
  return h;
}

double TdTarget(double reward, double gamma, std::span<const double> next_q) {
  Require(next_q.size() == kNumActions, ErrorKind::kInput, "expected two Q-values");
  const double target = reward + gamma * std::max(next_q[0], next_q[1]);
  Require(std::isfinite(target), ErrorKind::kNumeric, "non-finite TD target");
  return target;
}

template <typename T>
LossAndGrads<T> ComputeLossAndGrads(const BasicQNetwork<T>& net,
                                    const BasicQNetwork<T>& target_net,
                                    std::span<const Transition* const> batch,
                                    std::span<const double> is_weights,
                                    const LossOptions& options) {
  Require(!batch.empty(), ErrorKind::kInput, "empty batch");
  Require(is_weights.size() == batch.size(), ErrorKind::kInput,
          "importance weights do not match batch size");
  for (double w : is_weights) {
    Require(w > 0.0 && std::isfinite(w), ErrorKind::kInput,
            "importance weights must be positive");
  }

  const ParamSet<T>& layers = net.layers();
  const std::size_t num_layers = layers.size();
  LossAndGrads<T> out;
  out.grads = ZerosLike(layers);
  out.td_errors.resize(batch.size());

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  // acts[0] is the input; acts[l + 1] is the output of layer l.
  std::vector<std::vector<T>> acts(num_layers + 1);
  std::vector<T> upstream, downstream;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = *batch[i];
    Require(t.state.size() == t.next_state.size(), ErrorKind::kInput,
            "transition state dimensions differ");
    const double target = TdTarget(static_cast<double>(t.reward), options.gamma,
                                   target_net.Forward(t.next_state));

    Require(t.state.size() == net.input_size(), ErrorKind::kInput,
            "transition state does not match network input");
    acts[0].assign(t.state.begin(), t.state.end());
    for (std::size_t l = 0; l < num_layers; ++l) {
      acts[l + 1].resize(layers[l].rows);
      Dense(layers[l], acts[l].data(), acts[l + 1].data(), l + 1 < num_layers);
    }
    const std::size_t a = static_cast<std::size_t>(t.action);
    const double q = static_cast<double>(acts[num_layers][a]);
    const double delta = target - q;
    out.td_errors[i] = delta;

    const double w = is_weights[i];
    double dloss_dq;
    if (options.kind == LossKind::kHuber) {
      const double k = options.huber_delta;
      const double ad = std::abs(delta);
      out.loss += w * (ad <= k ? 0.5 * delta * delta : k * (ad - 0.5 * k)) * inv_batch;
      dloss_dq = -w * std::clamp(delta, -k, k) * inv_batch;
    } else {
      out.loss += w * delta * delta * inv_batch;
      dloss_dq = -2.0 * w * delta * inv_batch;
    }

    upstream.assign(kNumActions, T(0));
    upstream[a] = static_cast<T>(dloss_dq);
    for (std::size_t l = num_layers; l-- > 0;) {
      const DenseLayer<T>& layer = layers[l];
      DenseLayer<T>& g = out.grads[l];
      const std::vector<T>& input = acts[l];
      for (std::size_t r = 0; r < layer.rows; ++r) {
        const T u = upstream[r];
        if (u == T(0)) continue;
        g.biases[r] += u;
        T* gw = g.weights.data() + r * layer.cols;
        for (std::size_t c = 0; c < layer.cols; ++c) gw[c] += u * input[c];
      }
      if (l == 0) break;
      downstream.assign(layer.cols, T(0));
      for (std::size_t r = 0; r < layer.rows; ++r) {
        const T u = upstream[r];
        if (u == T(0)) continue;
        const T* w_row = layer.weights.data() + r * layer.cols;
        for (std::size_t c = 0; c < layer.cols; ++c) downstream[c] += w_row[c] * u;
      }
      // Rectifier derivative: the input of layer l is a post-ReLU activation.
      for (std::size_t c = 0; c < layer.cols; ++c) {
        if (!(input[c] > T(0))) downstream[c] = T(0);
      }
      upstream.swap(downstream);
    }
  }
  Require(std::isfinite(out.loss), ErrorKind::kNumeric, "non-finite loss");
  return out;
}

template <typename T>
LossAndGrads<T> ComputeLossAndGrads(const BasicQNetwork<T>& net,
                                    const BasicQNetwork<T>& target_net,
                                    std::span<const Transition> batch,
                                    std::span<const double> is_weights,
                                    const LossOptions& options) {
  std::vector<const Transition*> ptrs;
  ptrs.reserve(batch.size());
  for (const Transition& t : batch) ptrs.push_back(&t);
  return ComputeLossAndGrads<T>(net, target_net,
                                std::span<const Transition* const>(ptrs),
                                is_weights, options);
}

template <typename T>
void RmsPropStep(BasicQNetwork<T>& net, OptimizerState<T>& opt,
                 const ParamSet<T>& grads) {
  ParamSet<T>& params = net.mutable_layers();
  auto same_shape = [](const ParamSet<T>& a, const ParamSet<T>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t l = 0; l < a.size(); ++l) {
      if (a[l].weights.size() != b[l].weights.size() ||
          a[l].biases.size() != b[l].biases.size()) {
        return false;
      }
    }
    return true;
  };
  Require(same_shape(params, grads) && same_shape(params, opt.accumulators),
          ErrorKind::kInput, "gradient/optimizer shapes do not match network");

  const double lr = opt.options.learning_rate;
  const double decay = opt.options.decay;
  const double eps = opt.options.epsilon;
  auto update = [&](std::vector<T>& p, std::vector<T>& acc, const std::vector<T>& g) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double a = decay * static_cast<double>(acc[i]) + (1.0 - decay) * gi * gi;
      acc[i] = static_cast<T>(a);
      if (gi != 0.0) {
        p[i] = static_cast<T>(static_cast<double>(p[i]) -
                              lr * gi / (std::sqrt(static_cast<double>(acc[i])) + eps));
      }
    }
  };
  for (std::size_t l = 0; l < params.size(); ++l) {
    update(params[l].weights, opt.accumulators[l].weights, grads[l].weights);
    update(params[l].biases, opt.accumulators[l].biases, grads[l].biases);
  }
  Require(net.AllFinite(), ErrorKind::kNumeric, "non-finite parameter after update");
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void WriteLayers(io::ByteWriter& w, const ParamSet<float>& layers) {
  for (const auto& layer : layers) {
    w.Scalar(static_cast<std::uint32_t>(layer.rows));
    w.Scalar(static_cast<std::uint32_t>(layer.cols));
    w.Array<float>(layer.weights);
    w.Array<float>(layer.biases);
  }
}

ParamSet<float> ReadLayers(io::ByteReader& r, std::uint32_t count) {
  ParamSet<float> layers(count);
  for (auto& layer : layers) {
    layer.rows = r.Scalar<std::uint32_t>("rows");
    layer.cols = r.Scalar<std::uint32_t>("cols");
    if (layer.rows == 0 || layer.cols == 0) r.FailAt("empty layer shape");
    if (layer.rows * layer.cols > (std::size_t{1} << 32)) r.FailAt("layer too large");
    layer.weights.resize(layer.rows * layer.cols);
    layer.biases.resize(layer.rows);
    r.Array<float>(layer.weights, "weights");
    r.Array<float>(layer.biases, "biases");
  }
  return layers;
}

}  // namespace

std::string EncodeCheckpoint(const QNetwork& net, const ParamSet<float>& accumulators) {
  Require(accumulators.size() == net.layers().size(), ErrorKind::kInput,
          "accumulators do not match network");
  io::ByteWriter w;
  w.Bytes("DQADCKPT");
  w.Scalar(kCheckpointVersion);
  w.Scalar(static_cast<std::uint32_t>(net.layers().size()));
  WriteLayers(w, net.layers());
  WriteLayers(w, accumulators);
  return w.buffer();
}

Checkpoint DecodeCheckpoint(std::string_view bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.ExpectMagic("DQADCKPT");
  const auto version = r.Scalar<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    r.FailAt("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.Scalar<std::uint32_t>("layer count");
  if (count == 0 || count > 1024) r.FailAt("implausible layer count");
  ParamSet<float> layers = ReadLayers(r, count);
  ParamSet<float> accumulators = ReadLayers(r, count);
  r.ExpectEnd();
  for (std::size_t l = 0; l < count; ++l) {
    if (accumulators[l].rows != layers[l].rows || accumulators[l].cols != layers[l].cols) {
      r.FailAt("optimizer accumulators do not match layer " + std::to_string(l));
    }
  }
  Checkpoint ckpt;
  try {
    ckpt.net = QNetwork::FromLayers(std::move(layers));
  } catch (const Error& e) {
    r.FailAt(e.what());
  }
  ckpt.accumulators = std::move(accumulators);
  return ckpt;
}

void SaveCheckpoint(const std::filesystem::path& path, const QNetwork& net,
                    const ParamSet<float>& accumulators) {
  io::WriteFileAtomic(path, EncodeCheckpoint(net, accumulators));
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  return DecodeCheckpoint(io::ReadFile(path), path.string());
}

template ParamSet<float> ZerosLike(const ParamSet<float>&);
template ParamSet<double> ZerosLike(const ParamSet<double>&);
template class BasicQNetwork<float>;
template class BasicQNetwork<double>;
template LossAndGrads<float> ComputeLossAndGrads(const QNetwork&, const QNetwork&,
                                                 std::span<const Transition* const>,
                                                 std::span<const double>, const LossOptions&);
template LossAndGrads<double> ComputeLossAndGrads(const QNetwork64&, const QNetwork64&,
                                                  std::span<const Transition* const>,
                                                  std::span<const double>, const LossOptions&);
template LossAndGrads<float> ComputeLossAndGrads(const QNetwork&, const QNetwork&,
                                                 std::span<const Transition>,
                                                 std::span<const double>, const LossOptions&);
template LossAndGrads<double> ComputeLossAndGrads(const QNetwork64&, const QNetwork64&,
                                                  std::span<const Transition>,
                                                  std::span<const double>, const LossOptions&);
template void RmsPropStep(QNetwork&, OptimizerState<float>&, const ParamSet<float>&);
template void RmsPropStep(QNetwork64&, OptimizerState<double>&, const ParamSet<double>&);

}  // namespace dqad
