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

// DQN training loop for the anomaly agent.

#ifndef DQAD_TRAINER_HPP_
#define DQAD_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dqad/environment.hpp"
#include "dqad/features.hpp"
#include "dqad/qnet.hpp"
#include "dqad/random.hpp"
#include "json.hpp"

namespace dqad {

// Field names double as the JSON config keys.
struct TrainConfig {
  std::int64_t total_steps = 40000;
  std::int64_t warmup_steps = 2000;
  std::int64_t n_steps_per_episode = 2000;
  std::int64_t target_sync_K = 5000;
  std::int64_t resample_T = 500;
  double eps_start = 1.0;
  double eps_end = 0.1;
  std::int64_t eps_decay_steps = 1000;
  double gamma = 0.99;
  std::size_t batch_size = 32;
  std::size_t buffer_M = 10000;
  bool per_enabled = false;
  bool bs_enabled = false;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden_sizes = {256, 128};

  // Environment.
  double beta_exploit = 0.5;
  std::size_t N_images = 80;
  std::size_t cap = 100000;
  std::size_t bs_bank_size = 1000;
  std::size_t bs_K = 1000;
  bool exclude_self = false;

  // Optimizer and loss.
  double learning_rate = 1e-3;
  double rms_decay = 0.99;
  double rms_epsilon = 1e-8;
  std::string loss = "squared";  // "squared" | "huber"
  double huber_delta = 1.0;

  // Prioritized replay.
  double per_alpha = 0.6;
  double per_beta_start = 0.4;  // annealed linearly to 1 at total_steps
  double per_epsilon = 0.01;

  std::int64_t eval_every = 0;  // 0 disables snapshots

  void Validate() const;
  EnvConfig env() const;
  LossOptions loss_options() const;
  RmsPropOptions optimizer() const;
};

nlohmann::json ConfigToJson(const TrainConfig& config);
// Unknown keys and ill-typed values are configuration errors.
TrainConfig ConfigFromJson(const nlohmann::json& json);

// Linear from eps_start at step 0 to eps_end at eps_decay_steps, then flat.
double EpsilonAt(std::int64_t step, const TrainConfig& config);

// PER importance exponent: per_beta_start annealed linearly to 1.
double ImportanceBetaAt(std::int64_t step, const TrainConfig& config);

// argmax over q; a tie selects a0.
Action GreedyAction(std::span<const float> q);

// Draws u ~ U[0,1); u < epsilon draws a uniform action, otherwise greedy.
Action SelectAction(const QNetwork& net, std::span<const float> state,
                    double epsilon, Rng& rng);

struct StepRecord {
  std::int64_t step = 0;
  double epsilon = 0.0;
  Action action = Action::kNormal;
  int reward = 0;
  std::uint8_t gt = 0;
  std::optional<double> loss;  // empty during warmup

  bool operator==(const StepRecord&) const = default;
};

struct Snapshot {
  std::int64_t step = 0;
  nlohmann::json data;
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<Snapshot> snapshots;
  std::int64_t updates = 0;
  std::int64_t syncs = 0;
  std::int64_t resamples = 0;
  std::int64_t episodes = 0;
};

// One JSON object per line: step, epsilon, action, reward, gt, loss.
std::string RunLogToJsonLines(const RunLog& log);

using SnapshotFn = std::function<nlohmann::json(std::int64_t step, const QNetwork& net)>;

struct TrainResult {
  QNetwork net;
  OptimizerState<float> optimizer;
  RunLog log;
};

// Runs the agent on the training split. Deterministic given config.seed.
//
// Per environment step the RNG is consumed in this order: action selection,
// exploit/explore choice, S^a draw (exploit only), minibatch indices. Pool
// resampling and episode starts draw between steps.
TrainResult Train(const Dataset& dataset, const TrainConfig& config,
                  const SnapshotFn& snapshot = {});

}  // namespace dqad

#endif  // DQAD_TRAINER_HPP_
