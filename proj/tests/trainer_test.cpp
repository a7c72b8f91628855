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

#include <gtest/gtest.h>

#include "dqad/environment.hpp"
#include "oracles.hpp"

namespace dqad {
namespace {

Dataset TinyDataset(std::uint64_t seed = 3) {
  SynthSpec spec;
  spec.n_normal = 10;
  spec.n_anomalous = 2;
  spec.test_normal = 3;
  spec.test_anomalous = 3;
  spec.H = spec.W = 6;
  spec.C = 4;
  spec.blob_size = 2;
  spec.seed = seed;
  return SynthGenerate(spec);
}

TrainConfig TinyConfig() {
  TrainConfig cfg;
  cfg.total_steps = 300;
  cfg.warmup_steps = 40;
  cfg.n_steps_per_episode = 70;
  cfg.target_sync_K = 50;
  cfg.resample_T = 30;
  cfg.eps_decay_steps = 100;
  cfg.batch_size = 8;
  cfg.buffer_M = 128;
  cfg.hidden_sizes = {8, 6};
  cfg.N_images = 4;
  cfg.cap = 60;
  cfg.bs_bank_size = 10;
  cfg.bs_K = 5;
  cfg.seed = 5;
  return cfg;
}

void ExpectConfigError(const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected a configuration error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig) << e.what();
  }
}

TEST(EpsilonTest, ScheduleValues) {
  const TrainConfig cfg;
  EXPECT_EQ(EpsilonAt(0, cfg), 1.0);
  EXPECT_EQ(EpsilonAt(500, cfg), 0.55);
  EXPECT_EQ(EpsilonAt(1000, cfg), 0.1);
  EXPECT_EQ(EpsilonAt(40000, cfg), 0.1);
  double prev = 2.0;
  for (std::int64_t s = 0; s <= 2000; ++s) {
    const double e = EpsilonAt(s, cfg);
    EXPECT_LE(e, prev);
    EXPECT_GE(e, 0.1);
    EXPECT_LE(e, 1.0);
    prev = e;
  }
}

TEST(ImportanceBetaTest, AnnealsToOne) {
  TrainConfig cfg;
  cfg.total_steps = 1000;
  EXPECT_DOUBLE_EQ(ImportanceBetaAt(0, cfg), 0.4);
  EXPECT_DOUBLE_EQ(ImportanceBetaAt(500, cfg), 0.7);
  EXPECT_DOUBLE_EQ(ImportanceBetaAt(1000, cfg), 1.0);
}

TEST(SelectActionTest, GreedyAndTies) {
  EXPECT_EQ(GreedyAction(std::vector<float>{0.2f, 0.7f}), Action::kAnomalous);
  EXPECT_EQ(GreedyAction(std::vector<float>{0.3f, 0.3f}), Action::kNormal);
  const QNetwork net = QNetwork::FromLayers({{2, 1, {0.0f, 0.0f}, {0.2f, 0.7f}}});
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(SelectAction(net, std::vector<float>{1.0f}, 0.0, rng), Action::kAnomalous);
  }
  const QNetwork tie = QNetwork::FromLayers({{2, 1, {0.0f, 0.0f}, {0.5f, 0.5f}}});
  EXPECT_EQ(SelectAction(tie, std::vector<float>{1.0f}, 0.0, rng), Action::kNormal);
}

TEST(SelectActionTest, FullExplorationIsFair) {
  const QNetwork net = QNetwork::FromLayers({{2, 1, {0.0f, 0.0f}, {0.2f, 0.7f}}});
  Rng rng(2);
  int anomalous = 0;
  const int kDraws = 20000;
  for (int i = 0; i < kDraws; ++i) {
    anomalous += SelectAction(net, std::vector<float>{1.0f}, 1.0, rng) == Action::kAnomalous;
  }
  EXPECT_NEAR(static_cast<double>(anomalous) / kDraws, 0.5, 0.02);
}

TEST(TrainConfigTest, Validation) {
  TrainConfig cfg;
  cfg.warmup_steps = cfg.total_steps + 1;
  ExpectConfigError([&] { cfg.Validate(); });
  cfg = TrainConfig{};
  cfg.eps_end = 1.5;
  ExpectConfigError([&] { cfg.Validate(); });
  cfg = TrainConfig{};
  cfg.target_sync_K = 0;
  ExpectConfigError([&] { cfg.Validate(); });
  cfg = TrainConfig{};
  cfg.loss = "absolute";
  ExpectConfigError([&] { cfg.Validate(); });
  cfg = TrainConfig{};
  cfg.gamma = 1.5;
  ExpectConfigError([&] { cfg.Validate(); });
  EXPECT_NO_THROW(TrainConfig{}.Validate());
}

TEST(TrainConfigTest, JsonRoundTripAndStrictness) {
  const TrainConfig cfg = TinyConfig();
  const nlohmann::json j = ConfigToJson(cfg);
  EXPECT_EQ(ConfigToJson(ConfigFromJson(j)), j);
  EXPECT_TRUE(j.contains("target_sync_K"));
  EXPECT_TRUE(j.contains("per_enabled"));

  nlohmann::json partial = {{"total_steps", 77}, {"hidden_sizes", {5}}};
  const TrainConfig p = ConfigFromJson(partial);
  EXPECT_EQ(p.total_steps, 77);
  EXPECT_EQ(p.hidden_sizes, std::vector<std::size_t>{5});
  EXPECT_EQ(p.batch_size, TrainConfig{}.batch_size);

  ExpectConfigError([] { ConfigFromJson({{"total_step", 10}}); });
  ExpectConfigError([] { ConfigFromJson({{"batch_size", -3}}); });
  ExpectConfigError([] { ConfigFromJson({{"per_enabled", "yes"}}); });
  ExpectConfigError([] { ConfigFromJson({{"gamma", "high"}}); });
  ExpectConfigError([] { ConfigFromJson({{"hidden_sizes", {4, -1}}}); });
  ExpectConfigError([] { ConfigFromJson(nlohmann::json::array()); });
}

TEST(TrainTest, StepAccounting) {
  const Dataset data = TinyDataset();
  for (bool per : {false, true}) {
    for (bool bs : {false, true}) {
      TrainConfig cfg = TinyConfig();
      cfg.per_enabled = per;
      cfg.bs_enabled = bs;
      const TrainResult r = Train(data, cfg);
      EXPECT_EQ(r.log.steps.size(), 300u);
      EXPECT_EQ(r.log.updates, 300 - 40);
      EXPECT_EQ(r.log.syncs, 300 / 50);
      EXPECT_EQ(r.log.resamples, 300 / 30);
      EXPECT_EQ(r.log.episodes, 5);  // ceil(300 / 70)
      EXPECT_TRUE(r.net.AllFinite());
    }
  }
}

TEST(TrainTest, LogIsConsistent) {
  const Dataset data = TinyDataset();
  const TrainConfig cfg = TinyConfig();
  const TrainResult r = Train(data, cfg);
  for (std::size_t i = 0; i < r.log.steps.size(); ++i) {
    const StepRecord& s = r.log.steps[i];
    EXPECT_EQ(s.step, static_cast<std::int64_t>(i));
    EXPECT_EQ(s.reward, Reward(s.action, s.gt));
    EXPECT_EQ(s.epsilon, EpsilonAt(s.step, cfg));
    EXPECT_EQ(s.loss.has_value(), s.step >= cfg.warmup_steps);
    if (s.loss) EXPECT_GE(*s.loss, 0.0);
  }
  // Each episode opens on a normal-pool state.
  for (std::int64_t start = 0; start < cfg.total_steps; start += cfg.n_steps_per_episode) {
    EXPECT_EQ(r.log.steps[static_cast<std::size_t>(start)].gt, 0);
  }
  const std::string lines = RunLogToJsonLines(r.log);
  EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 300);
  const auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
  EXPECT_TRUE(first["loss"].is_null());
  for (const char* key : {"step", "epsilon", "action", "reward", "gt"}) {
    EXPECT_TRUE(first.contains(key));
  }
}

TEST(TrainTest, DeterministicForSeed) {
  const Dataset data = TinyDataset();
  TrainConfig cfg = TinyConfig();
  cfg.per_enabled = true;
  cfg.bs_enabled = true;
  const TrainResult a = Train(data, cfg);
  const TrainResult b = Train(data, cfg);
  EXPECT_EQ(a.net, b.net);
  EXPECT_EQ(a.net.Checksum(), b.net.Checksum());
  EXPECT_EQ(a.log.steps, b.log.steps);
  EXPECT_EQ(a.optimizer.accumulators, b.optimizer.accumulators);
  cfg.seed += 1;
  EXPECT_NE(Train(data, cfg).net.Checksum(), a.net.Checksum());
}

TEST(TrainTest, SnapshotsFollowSchedule) {
  const Dataset data = TinyDataset();
  TrainConfig cfg = TinyConfig();
  cfg.eval_every = 100;
  std::vector<std::int64_t> seen;
  const TrainResult r = Train(data, cfg, [&](std::int64_t step, const QNetwork&) {
    seen.push_back(step);
    return nlohmann::json{{"ok", true}};
  });
  EXPECT_EQ(seen, (std::vector<std::int64_t>{100, 200, 300}));
  EXPECT_EQ(r.log.snapshots.size(), 3u);
}

TEST(TrainTest, RequiresAnomalousTrainingImages) {
  Dataset data = TinyDataset();
  Dataset normals;
  for (std::size_t i = 0; i < data.maps.size(); ++i) {
    if (data.manifest.entries[i].kind == ImageKind::kNormal) {
      normals.manifest.entries.push_back(data.manifest.entries[i]);
      normals.maps.push_back(data.maps[i]);
    }
  }
  ExpectConfigError([&] { Train(normals, TinyConfig()); });
}

}  // namespace
}  // namespace dqad
