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

#include "dqad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "dqad/error.hpp"
#include "dqad/replay.hpp"

namespace dqad {

void TrainConfig::Validate() const {
  auto check = [](bool ok, const std::string& message) {
    Require(ok, ErrorKind::kConfig, message);
  };
  check(total_steps > 0, "total_steps must be positive");
  check(warmup_steps >= 0 && warmup_steps <= total_steps,
        "warmup_steps must lie in [0, total_steps]");
  check(n_steps_per_episode > 0, "n_steps_per_episode must be positive");
  check(target_sync_K > 0, "target_sync_K must be positive");
  check(resample_T > 0, "resample_T must be positive");
  check(eps_start >= 0.0 && eps_start <= 1.0 && eps_end >= 0.0 && eps_end <= 1.0,
        "epsilon bounds must lie in [0, 1]");
  check(eps_end <= eps_start, "eps_end must not exceed eps_start");
  check(eps_decay_steps > 0, "eps_decay_steps must be positive");
  check(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  check(batch_size > 0, "batch_size must be positive");
  check(buffer_M > 0, "buffer_M must be positive");
  check(!hidden_sizes.empty(), "hidden_sizes needs at least one layer");
  check(std::all_of(hidden_sizes.begin(), hidden_sizes.end(),
                    [](std::size_t s) { return s > 0; }),
        "hidden sizes must be positive");
  env().Validate();
  check(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
  check(rms_decay >= 0.0 && rms_decay < 1.0, "rms_decay must lie in [0, 1)");
  check(rms_epsilon >= 0.0, "rms_epsilon must be >= 0");
  check(loss == "squared" || loss == "huber", "loss must be \"squared\" or \"huber\"");
  check(huber_delta > 0.0, "huber_delta must be positive");
  check(per_alpha >= 0.0, "per_alpha must be >= 0");
  check(per_beta_start >= 0.0 && per_beta_start <= 1.0, "per_beta_start must lie in [0, 1]");
  check(per_epsilon > 0.0, "per_epsilon must be positive");
  check(eval_every >= 0, "eval_every must be >= 0");
}

EnvConfig TrainConfig::env() const {
  EnvConfig e;
  e.beta_exploit = beta_exploit;
  e.N_images = N_images;
  e.cap = cap;
  e.bs_enabled = bs_enabled;
  e.bs_bank_size = bs_bank_size;
  e.bs_K = bs_K;
  e.exclude_self = exclude_self;
  return e;
}

LossOptions TrainConfig::loss_options() const {
  return {gamma, loss == "huber" ? LossKind::kHuber : LossKind::kSquared, huber_delta};
}

RmsPropOptions TrainConfig::optimizer() const {
  return {learning_rate, rms_decay, rms_epsilon};
}

namespace {

template <typename T>
T ReadField(const nlohmann::json& value, const std::string& key) {
  if constexpr (std::is_same_v<T, bool>) {
    Require(value.is_boolean(), ErrorKind::kConfig, "config key \"" + key + "\" must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    Require(value.is_number_integer(), ErrorKind::kConfig,
            "config key \"" + key + "\" must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      Require(value.is_number_unsigned() || value.get<std::int64_t>() >= 0, ErrorKind::kConfig,
              "config key \"" + key + "\" must be non-negative");
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    Require(value.is_number(), ErrorKind::kConfig, "config key \"" + key + "\" must be a number");
  } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
    Require(value.is_array(), ErrorKind::kConfig, "config key \"" + key + "\" must be an array");
    for (const auto& v : value) {
      Require(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0),
              ErrorKind::kConfig,
              "config key \"" + key + "\" must hold non-negative integers");
    }
  }
  return value.get<T>();
}

}  // namespace

// X-macro over every config field: (name).
#define DQAD_TRAIN_CONFIG_FIELDS(X) \
  X(total_steps)                    \
  X(warmup_steps)                   \
  X(n_steps_per_episode)            \
  X(target_sync_K)                  \
  X(resample_T)                     \
  X(eps_start)                      \
  X(eps_end)                        \
  X(eps_decay_steps)                \
  X(gamma)                          \
  X(batch_size)                     \
  X(buffer_M)                       \
  X(per_enabled)                    \
  X(bs_enabled)                     \
  X(seed)                           \
  X(hidden_sizes)                   \
  X(beta_exploit)                   \
  X(N_images)                       \
  X(cap)                            \
  X(bs_bank_size)                   \
  X(bs_K)                           \
  X(exclude_self)                   \
  X(learning_rate)                  \
  X(rms_decay)                      \
  X(rms_epsilon)                    \
  X(loss)                           \
  X(huber_delta)                    \
  X(per_alpha)                      \
  X(per_beta_start)                 \
  X(per_epsilon)                    \
  X(eval_every)

nlohmann::json ConfigToJson(const TrainConfig& config) {
  nlohmann::ordered_json out;
#define DQAD_TO_JSON(name) out[#name] = config.name;
  DQAD_TRAIN_CONFIG_FIELDS(DQAD_TO_JSON)
#undef DQAD_TO_JSON
  return nlohmann::json(out);
}

TrainConfig ConfigFromJson(const nlohmann::json& json) {
  Require(json.is_object(), ErrorKind::kConfig, "config must be a JSON object");
  TrainConfig config;
  for (const auto& [key, value] : json.items()) {
    bool known = false;
    try {
#define DQAD_FROM_JSON(name)                                   \
  if (key == #name) {                                          \
    known = true;                                              \
    config.name = ReadField<decltype(config.name)>(value, key); \
  }
      DQAD_TRAIN_CONFIG_FIELDS(DQAD_FROM_JSON)
#undef DQAD_FROM_JSON
    } catch (const nlohmann::json::exception& ex) {
      Fail(ErrorKind::kConfig, "config key \"" + key + "\": " + ex.what());
    }
    Require(known, ErrorKind::kConfig, "unknown config key \"" + key + "\"");
  }
  return config;
}

#undef DQAD_TRAIN_CONFIG_FIELDS

double EpsilonAt(std::int64_t step, const TrainConfig& config) {
  if (step >= config.eps_decay_steps) return config.eps_end;
  if (step <= 0) return config.eps_start;
  const double f = static_cast<double>(step) / static_cast<double>(config.eps_decay_steps);
  return (1.0 - f) * config.eps_start + f * config.eps_end;
}

double ImportanceBetaAt(std::int64_t step, const TrainConfig& config) {
  const double f = std::clamp(
      static_cast<double>(step) / static_cast<double>(config.total_steps), 0.0, 1.0);
  return config.per_beta_start + (1.0 - config.per_beta_start) * f;
}

Action GreedyAction(std::span<const float> q) {
  Require(q.size() == kNumActions, ErrorKind::kInput, "expected two Q-values");
  return q[1] > q[0] ? Action::kAnomalous : Action::kNormal;
}

Action SelectAction(const QNetwork& net, std::span<const float> state, double epsilon,
                    Rng& rng) {
  if (UniformUnit(rng) < epsilon) {
    return UniformIndex(rng, kNumActions) == 0 ? Action::kNormal : Action::kAnomalous;
  }
  const auto q = net.Forward(state);
  return GreedyAction(q);
}

std::string RunLogToJsonLines(const RunLog& log) {
  std::string out;
  for (const StepRecord& r : log.steps) {
    nlohmann::ordered_json line;
    line["step"] = r.step;
    line["epsilon"] = r.epsilon;
    line["action"] = static_cast<int>(r.action);
    line["reward"] = r.reward;
    line["gt"] = r.gt;
    line["loss"] = r.loss ? nlohmann::ordered_json(*r.loss) : nlohmann::ordered_json();
    out += line.dump();
    out += '\n';
  }
  return out;
}

TrainResult Train(const Dataset& dataset, const TrainConfig& config,
                  const SnapshotFn& snapshot) {
  config.Validate();
  const auto train_anomalous = dataset.Select(Split::kTrain, ImageKind::kAnomalous);
  const auto train_normal = dataset.Select(Split::kTrain, ImageKind::kNormal);
  Require(!train_anomalous.empty() && !train_normal.empty(), ErrorKind::kConfig,
          "training needs at least one anomalous and one normal training image");

  Rng rng(config.seed);
  std::vector<std::size_t> sizes{dataset.maps[train_normal.front()].channels};
  sizes.insert(sizes.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
  sizes.push_back(kNumActions);

  TrainResult result{QNetwork::Initialized(sizes, rng), {}, {}};
  QNetwork& net = result.net;
  QNetwork target = net;
  result.optimizer = OptimizerState<float>::For(net, config.optimizer());
  RunLog& log = result.log;
  log.steps.reserve(static_cast<std::size_t>(config.total_steps));

  ReplayBuffer buffer({config.buffer_M, config.per_alpha, config.per_epsilon});
  const SampleMode mode = config.per_enabled ? SampleMode::kPrioritized : SampleMode::kUniform;
  const LossOptions loss_options = config.loss_options();
  const EnvConfig env = config.env();

  BoundaryBank bank;
  if (config.bs_enabled) bank = BoundaryBank::Fill(dataset, config.bs_bank_size);

  // The exploration embedding comes from the target network, which is frozen
  // between syncs, so the pool cache and the query embedding always agree.
  FeaturePools pools = ResamplePools(dataset, env, bank, target, rng);
  RefreshEmbeddings(pools, target);

  std::int64_t step = 0;
  while (step < config.total_steps) {
    ++log.episodes;
    const std::size_t start = UniformIndex(rng, pools.normal.rows());
    const auto start_row = pools.normal.row(start);
    LabeledFeature state{std::vector<float>(start_row.begin(), start_row.end()), 0};

    for (std::int64_t t = 0; t < config.n_steps_per_episode && step < config.total_steps; ++t) {
      StepRecord record;
      record.step = step;
      record.epsilon = EpsilonAt(step, config);
      record.action = SelectAction(net, state.vector, record.epsilon, rng);
      record.reward = Reward(record.action, state.gt);
      record.gt = state.gt;

      EnvStep next = NextState(state.vector, record.action, pools, target, env, rng);
      buffer.Push({state.vector, record.action, record.reward, next.feature.vector});

      if (step >= config.warmup_steps) {
        const SampledBatch batch = buffer.Sample(config.batch_size, mode,
                                                 ImportanceBetaAt(step, config), rng);
        LossAndGrads<float> lg = ComputeLossAndGrads<float>(
            net, target, std::span<const Transition* const>(batch.transitions),
            batch.is_weights, loss_options);
        RmsPropStep(net, result.optimizer, lg.grads);
        if (config.per_enabled) buffer.UpdatePriorities(batch.ids, lg.td_errors);
        record.loss = lg.loss;
        ++log.updates;
      }
      log.steps.push_back(record);
      state = std::move(next.feature);
      ++step;

      if (step % config.target_sync_K == 0) {
        SyncTarget(net, target);
        RefreshEmbeddings(pools, target);
        ++log.syncs;
      }
      if (step % config.resample_T == 0) {
        pools = ResamplePools(dataset, env, bank, target, rng);
        RefreshEmbeddings(pools, target);
        ++log.resamples;
      }
      if (snapshot && config.eval_every > 0 && step % config.eval_every == 0) {
        log.snapshots.push_back({step, snapshot(step, net)});
      }
    }
  }
  return result;
}

}  // namespace dqad
