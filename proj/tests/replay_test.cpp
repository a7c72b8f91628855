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

#include "dqad/replay.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"

namespace dqad {
namespace {

// Transitions are told apart by their state value.
Transition Tagged(float tag) { return {{tag}, Action::kNormal, 0, {tag}}; }

ReplayBuffer WithPriorities(const std::vector<double>& p, double alpha) {
  ReplayBuffer buf({p.size(), alpha, 1e-3});
  std::vector<EntryId> ids;
  std::vector<double> td;
  for (std::size_t i = 0; i < p.size(); ++i) {
    buf.Push(Tagged(static_cast<float>(i)));
    ids.push_back(buf.id_at(i));
    td.push_back(p[i] - 1e-3);
  }
  buf.UpdatePriorities(ids, td);
  return buf;
}

TEST(PriorityTest, Examples) {
  EXPECT_DOUBLE_EQ(PriorityFromTd(0.0, 0.01), 0.01);
  EXPECT_DOUBLE_EQ(PriorityFromTd(-2.0, 0.01), 2.01);
  EXPECT_EQ(PriorityFromTd(0.37, 0.01), PriorityFromTd(-0.37, 0.01));
}

TEST(ImportanceWeightsTest, Examples) {
  const auto w0 = ImportanceWeights(std::vector<double>{0.1, 0.7, 0.2}, 3, 0.0);
  for (double w : w0) EXPECT_EQ(w, 1.0);
  const auto w1 = ImportanceWeights(std::vector<double>{0.75, 0.25}, 2, 1.0);
  EXPECT_NEAR(w1[0], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(w1[1], 1.0, 1e-12);
  const auto wu = ImportanceWeights(std::vector<double>{0.25, 0.25, 0.25}, 4, 0.7);
  for (double w : wu) EXPECT_DOUBLE_EQ(w, 1.0);
  EXPECT_THROW(ImportanceWeights(std::vector<double>{0.5, 0.0}, 2, 1.0), Error);
}

TEST(ReplayBufferTest, FifoEviction) {
  ReplayBuffer buf({2, 0.6, 0.01});
  for (float t : {1.0f, 2.0f, 3.0f}) buf.Push(Tagged(t));
  ASSERT_EQ(buf.size(), 2u);
  EXPECT_EQ(buf.at(0).state[0], 2.0f);
  EXPECT_EQ(buf.at(1).state[0], 3.0f);
}

TEST(ReplayBufferTest, FirstPushHasUnitPriority) {
  ReplayBuffer buf({4, 0.6, 0.01});
  buf.Push(Tagged(0));
  EXPECT_EQ(buf.size(), 1u);
  EXPECT_EQ(buf.priority_at(0), 1.0);
}

TEST(ReplayBufferTest, NewEntryTakesMaxPriority) {
  ReplayBuffer buf({8, 1.0, 0.01});
  buf.Push(Tagged(0));
  buf.Push(Tagged(1));
  buf.UpdatePriorities(std::vector<EntryId>{buf.id_at(0), buf.id_at(1)},
                       std::vector<double>{0.99, 4.99});
  EXPECT_DOUBLE_EQ(buf.priority_at(0), 1.0);
  EXPECT_DOUBLE_EQ(buf.priority_at(1), 5.0);
  buf.Push(Tagged(2));
  EXPECT_DOUBLE_EQ(buf.priority_at(2), 5.0);
}

TEST(ReplayBufferTest, MaxPriorityIgnoresEvictedEntry) {
  ReplayBuffer buf({2, 1.0, 0.01});
  buf.Push(Tagged(0));
  buf.Push(Tagged(1));
  buf.UpdatePriorities(std::vector<EntryId>{buf.id_at(0), buf.id_at(1)},
                       std::vector<double>{8.99, 0.99});
  buf.Push(Tagged(2));  // evicts the priority-9 entry
  EXPECT_DOUBLE_EQ(buf.priority_at(1), 1.0);
}

TEST(ReplayBufferTest, ProbabilityExamples) {
  const auto eq = WithPriorities({1.0, 1.0}, 1.0);
  EXPECT_NEAR(eq.probability_at(0), 0.5, 1e-12);
  const auto skew = WithPriorities({3.0, 1.0}, 1.0);
  EXPECT_NEAR(skew.probability_at(0), 0.75, 1e-12);
  EXPECT_NEAR(skew.probability_at(1), 0.25, 1e-12);
  const auto flat = WithPriorities({3.0, 1.0, 0.2, 40.0}, 0.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(flat.probability_at(i), 0.25, 1e-12);
}

TEST(ReplayBufferTest, ZeroTdRemainsSampleable) {
  ReplayBuffer buf({3, 0.6, 0.01});
  buf.Push(Tagged(0));
  buf.UpdatePriorities(std::vector<EntryId>{buf.id_at(0)}, std::vector<double>{0.0});
  EXPECT_DOUBLE_EQ(buf.priority_at(0), 0.01);
  Rng rng(1);
  const auto batch = buf.Sample(4, SampleMode::kPrioritized, 0.4, rng);
  EXPECT_EQ(batch.ids.size(), 4u);
}

TEST(ReplayBufferTest, EmptySampleIsStateError) {
  ReplayBuffer buf({3, 0.6, 0.01});
  Rng rng(1);
  try {
    buf.Sample(1, SampleMode::kUniform, 0.4, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kState);
  }
}

TEST(ReplayBufferTest, RejectsInvalidTransitions) {
  ReplayBuffer buf({3, 0.6, 0.01});
  EXPECT_THROW(buf.Push({{1.0f}, Action::kNormal, 2, {1.0f}}), Error);
  EXPECT_THROW(buf.Push({{1.0f}, Action::kNormal, 0, {1.0f, 2.0f}}), Error);
}

TEST(ReplayBufferTest, StaleIdsAreSkipped) {
  ReplayBuffer buf({2, 1.0, 0.01});
  buf.Push(Tagged(0));
  const EntryId old = buf.id_at(0);
  buf.Push(Tagged(1));
  buf.Push(Tagged(2));  // overwrites old's slot
  const double before = buf.priority_at(1);
  buf.UpdatePriorities(std::vector<EntryId>{old}, std::vector<double>{100.0});
  EXPECT_EQ(buf.priority_at(1), before);
  EXPECT_EQ(buf.priority_at(0), 1.0);
}

TEST(ReplayBufferTest, TreeRootTracksLeavesUnderRandomOperations) {
  Rng rng(21);
  ReplayBuffer buf({37, 0.6, 0.01});
  std::vector<float> expected;
  for (int op = 0; op < 2000; ++op) {
    if (buf.size() == 0 || UniformUnit(rng) < 0.5) {
      buf.Push(Tagged(static_cast<float>(op)));
      expected.push_back(static_cast<float>(op));
      if (expected.size() > 37) expected.erase(expected.begin());
    } else {
      const auto batch = buf.Sample(5, SampleMode::kPrioritized, 0.5, rng);
      std::vector<double> td;
      for (std::size_t i = 0; i < batch.ids.size(); ++i) td.push_back(UniformUnit(rng) * 6 - 3);
      buf.UpdatePriorities(batch.ids, td);
    }
    ASSERT_LE(buf.size(), buf.capacity());
    ASSERT_NEAR(buf.tree_total(), buf.leaf_total(), 1e-9);
  }
  for (std::size_t i = 0; i < buf.size(); ++i) {
    EXPECT_EQ(buf.at(i).state[0], expected[i]);
    EXPECT_GT(buf.priority_at(i), 0.0);
  }
}

TEST(ReplayBufferTest, PrioritizedFrequenciesMatchFormula) {
  std::vector<double> p;
  for (int i = 0; i < 16; ++i) p.push_back(0.05 + 0.3 * i);
  p[5] = 40.0;  // one dominant entry
  const auto buf = WithPriorities(p, 0.6);
  double z = 0.0;
  for (double v : p) z += std::pow(v, 0.6);
  Rng rng(99);
  std::vector<double> counts(16, 0.0);
  const int kDraws = 100000;
  const auto batch = buf.Sample(kDraws, SampleMode::kPrioritized, 0.4, rng);
  for (const auto& id : batch.ids) counts[id.slot] += 1.0;
  for (std::size_t i = 0; i < 16; ++i) {
    const double expected = std::pow(p[i], 0.6) / z;
    EXPECT_NEAR(buf.probability_at(i), expected, 1e-12);
    EXPECT_NEAR(counts[i] / kDraws, expected, 0.02);
  }
}

TEST(ReplayBufferTest, SampledWeightsFollowFormula) {
  const auto buf = WithPriorities({0.5, 2.0, 1.0, 4.0}, 0.7);
  Rng rng(3);
  const auto batch = buf.Sample(64, SampleMode::kPrioritized, 0.4, rng);
  double max_raw = 0.0;
  std::vector<double> raw;
  for (double P : batch.probabilities) {
    raw.push_back(std::pow(1.0 / (4.0 * P), 0.4));
    max_raw = std::max(max_raw, raw.back());
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    EXPECT_NEAR(batch.is_weights[i], raw[i] / max_raw, 1e-9);
    EXPECT_NEAR(batch.probabilities[i], buf.probability_at(batch.ids[i].slot), 1e-12);
  }
}

TEST(ReplayBufferTest, UniformModeIsUniformWithUnitWeights) {
  const auto buf = WithPriorities({0.5, 9.0, 1.0, 4.0, 2.0}, 0.9);
  Rng rng(5);
  const int kDraws = 100000;
  const auto batch = buf.Sample(kDraws, SampleMode::kUniform, 0.4, rng);
  std::vector<double> counts(5, 0.0);
  for (const auto& id : batch.ids) counts[id.slot] += 1.0;
  for (double c : counts) EXPECT_NEAR(c / kDraws, 0.2, 0.02);
  for (double w : batch.is_weights) EXPECT_EQ(w, 1.0);
}

}  // namespace
}  // namespace dqad
