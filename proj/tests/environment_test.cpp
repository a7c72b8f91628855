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

#include "dqad/environment.hpp"

#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "oracles.hpp"

namespace dqad {
namespace {

using testing::GaussianNet;
using testing::GaussianVector;

FeatureMatrix Rows(const std::vector<std::vector<float>>& rows) {
  FeatureMatrix m;
  for (const auto& r : rows) m.push_back(r);
  return m;
}

// One hidden layer equal to the identity: embeddings are the rectified
// features, so distances can be set by hand on the positive orthant.
QNetwork IdentityEmbedNet(std::size_t dim) {
  DenseLayer<float> hidden{dim, dim, std::vector<float>(dim * dim, 0.0f),
                           std::vector<float>(dim, 0.0f)};
  for (std::size_t i = 0; i < dim; ++i) hidden.weights[i * dim + i] = 1.0f;
  DenseLayer<float> head{2, dim, std::vector<float>(2 * dim, 0.0f), {0.0f, 0.0f}};
  return QNetwork::FromLayers({hidden, head});
}

FeaturePools NormalPool(FeatureMatrix normal, const QNetwork& net) {
  FeaturePools pools;
  pools.normal = std::move(normal);
  RefreshEmbeddings(pools, net);
  return pools;
}

SynthSpec SmallSpec() {
  SynthSpec spec;
  spec.n_normal = 12;
  spec.n_anomalous = 3;
  spec.test_normal = 2;
  spec.test_anomalous = 2;
  spec.H = spec.W = 6;
  spec.C = 3;
  spec.blob_size = 2;
  spec.seed = 17;
  return spec;
}

TEST(RewardTest, ExhaustiveTable) {
  EXPECT_EQ(Reward(Action::kAnomalous, 1), 1);
  EXPECT_EQ(Reward(Action::kNormal, 1), -1);
  EXPECT_EQ(Reward(Action::kAnomalous, 0), -2);
  EXPECT_EQ(Reward(Action::kNormal, 0), 0);
}

TEST(EuclideanTest, Examples) {
  const std::vector<float> zero{0, 0}, p{3, 4};
  EXPECT_EQ(Euclidean(p, p), 0.0);
  EXPECT_EQ(Euclidean(zero, p), 5.0);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto a = GaussianVector(7, rng), b = GaussianVector(7, rng);
    EXPECT_EQ(Euclidean(a, b), Euclidean(b, a));
  }
  EXPECT_THROW(Euclidean(zero, std::vector<float>{1, 2, 3}), Error);
}

TEST(ExploitTest, SingletonAndGt) {
  FeaturePools pools;
  pools.anomalous = Rows({{4, 5}});
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    const EnvStep step = ExploitAnomalous(pools, rng);
    EXPECT_EQ(step.feature.vector, (std::vector<float>{4, 5}));
    EXPECT_EQ(step.feature.gt, 1);
  }
}

TEST(ExploitTest, UniformOverPool) {
  FeaturePools pools;
  pools.anomalous = Rows({{0}, {1}, {2}, {3}});
  Rng rng(3);
  std::vector<double> counts(4, 0);
  const int kDraws = 40000;
  for (int i = 0; i < kDraws; ++i) {
    const EnvStep step = ExploitAnomalous(pools, rng);
    EXPECT_EQ(step.feature.gt, 1);
    counts[step.pool_index] += 1;
  }
  for (double c : counts) EXPECT_NEAR(c / kDraws, 0.25, 0.02);
}

TEST(ExploitTest, EmptyPoolIsStateError) {
  FeaturePools pools;
  Rng rng(1);
  try {
    ExploitAnomalous(pools, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kState);
  }
}

TEST(ExploreTest, SingletonPool) {
  const QNetwork net = IdentityEmbedNet(2);
  const auto pools = NormalPool(Rows({{1, 1}}), net);
  for (Action a : {Action::kNormal, Action::kAnomalous}) {
    const EnvStep step = ExploreNormal(std::vector<float>{5, 5}, a, pools, net);
    EXPECT_EQ(step.pool_index, 0u);
    EXPECT_EQ(step.feature.gt, 0);
  }
}

TEST(ExploreTest, NearestForAnomalousFarthestForNormal) {
  const QNetwork net = IdentityEmbedNet(1);
  // Distances {1, 2, 9} from the query 10.
  const auto pools = NormalPool(Rows({{12}, {9}, {19}}), net);
  const std::vector<float> s{10};
  EXPECT_EQ(ExploreNormal(s, Action::kAnomalous, pools, net).pool_index, 1u);
  EXPECT_EQ(ExploreNormal(s, Action::kNormal, pools, net).pool_index, 2u);
}

TEST(ExploreTest, TiesGoToLowestIndex) {
  const QNetwork net = IdentityEmbedNet(1);
  const auto pools = NormalPool(Rows({{14}, {6}, {6}, {14}}), net);
  const std::vector<float> s{10};
  EXPECT_EQ(ExploreNormal(s, Action::kAnomalous, pools, net).pool_index, 0u);
  EXPECT_EQ(ExploreNormal(s, Action::kNormal, pools, net).pool_index, 0u);
}

TEST(ExploreTest, ExcludeSelfSkipsTheQuery) {
  const QNetwork net = IdentityEmbedNet(1);
  const auto pools = NormalPool(Rows({{3}, {10}, {11}}), net);
  const std::vector<float> s{10};
  EXPECT_EQ(ExploreNormal(s, Action::kAnomalous, pools, net, false).pool_index, 1u);
  EXPECT_EQ(ExploreNormal(s, Action::kAnomalous, pools, net, true).pool_index, 2u);
}

TEST(ExploreTest, StaleOrEmptyPoolIsStateError) {
  const QNetwork net = IdentityEmbedNet(1);
  FeaturePools stale;
  stale.normal = Rows({{1}});
  FeaturePools empty;
  for (const FeaturePools* p : {&stale, &empty}) {
    try {
      ExploreNormal(std::vector<float>{0}, Action::kNormal, *p, net);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kState);
    }
  }
}

TEST(ExploreTest, MatchesBruteForceOracle) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 2 + UniformIndex(rng, 6);
    const auto net = GaussianNet<float>({dim, 1 + UniformIndex(rng, 8), 2}, rng);
    FeatureMatrix pool;
    const std::size_t n = 1 + UniformIndex(rng, 40);
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && UniformUnit(rng) < 0.2) {
        const auto dup = pool.row(UniformIndex(rng, i));
        pool.push_back(std::vector<float>(dup.begin(), dup.end()));
      } else {
        pool.push_back(GaussianVector(dim, rng));
      }
    }
    const auto pools = NormalPool(pool, net);
    const auto q = GaussianVector(dim, rng);
    EXPECT_EQ(ExploreNormal(q, Action::kAnomalous, pools, net).pool_index,
              testing::BruteForceNeighbor(net, q, pool, false));
    EXPECT_EQ(ExploreNormal(q, Action::kNormal, pools, net).pool_index,
              testing::BruteForceNeighbor(net, q, pool, true));
  }
}

TEST(NextStateTest, DegenerateMixing) {
  const QNetwork net = IdentityEmbedNet(1);
  auto pools = NormalPool(Rows({{1}, {2}}), net);
  pools.anomalous = Rows({{7}});
  EnvConfig cfg;
  Rng rng(4);
  cfg.beta_exploit = 1.0;
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(NextState(std::vector<float>{0}, Action::kNormal, pools, net, cfg, rng).feature.gt,
              1);
  }
  cfg.beta_exploit = 0.0;
  for (int i = 0; i < 100; ++i) {
    const EnvStep s = NextState(std::vector<float>{0}, Action::kNormal, pools, net, cfg, rng);
    EXPECT_EQ(s.source, StateSource::kNormalPool);
    EXPECT_EQ(s.feature.gt, 0);
  }
}

TEST(NextStateTest, MixingRatioConverges) {
  const QNetwork net = IdentityEmbedNet(1);
  auto pools = NormalPool(Rows({{1}, {2}}), net);
  pools.anomalous = Rows({{7}});
  EnvConfig cfg;
  cfg.beta_exploit = 0.5;
  Rng rng(5);
  int anomalous = 0;
  const int kCalls = 40000;
  for (int i = 0; i < kCalls; ++i) {
    anomalous += NextState(std::vector<float>{0}, Action::kAnomalous, pools, net, cfg, rng)
                     .feature.gt;
  }
  EXPECT_NEAR(static_cast<double>(anomalous) / kCalls, 0.5, 0.02);
}

TEST(BoundarySelectTest, Examples) {
  const QNetwork net = IdentityEmbedNet(1);
  BoundaryBank bank;
  bank.features = Rows({{10}});
  EXPECT_EQ(BoundarySelect(bank, Rows({{15}, {11}, {13}}), net, 2),
            (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(BoundarySelect(bank, Rows({{15}, {11}, {13}}), net, 3),
            (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_EQ(BoundarySelect(bank, Rows({{13}, {12}, {12}}), net, 2),
            (std::vector<std::size_t>{1, 2}));
}

TEST(BoundarySelectTest, Errors) {
  const QNetwork net = IdentityEmbedNet(1);
  BoundaryBank empty;
  try {
    BoundarySelect(empty, Rows({{1}}), net, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kState);
  }
  BoundaryBank bank;
  bank.features = Rows({{1}});
  EXPECT_THROW(BoundarySelect(bank, Rows({{1}}), net, 2), Error);
}

TEST(BoundaryBankTest, FillsInDatasetOrderUpToSize) {
  const Dataset data = SynthGenerate(SmallSpec());
  const BoundaryBank bank = BoundaryBank::Fill(data, 5);
  ASSERT_EQ(bank.features.rows(), 5u);
  const auto first = data.Select(Split::kTrain, ImageKind::kAnomalous).front();
  const auto& map = data.maps[first];
  std::size_t k = 0;
  for (std::size_t p = 0; p < map.positions() && k < 5; ++p) {
    if (!map.mask[p]) continue;
    const auto row = bank.features.row(k++);
    EXPECT_TRUE(std::equal(row.begin(), row.end(), map.position(p).begin()));
  }
  EXPECT_EQ(BoundaryBank::Fill(data, 100000).features.rows(), 3u * 4u);
}

TEST(ResampleTest, PoolsRespectCapAndSources) {
  const Dataset data = SynthGenerate(SmallSpec());
  Rng rng(6);
  const auto net = GaussianNet<float>({3, 4, 2}, rng);
  EnvConfig cfg;
  cfg.N_images = 5;
  cfg.cap = 10;
  const BoundaryBank bank;
  const FeaturePools pools = ResamplePools(data, cfg, bank, net, rng);
  EXPECT_EQ(pools.normal.rows(), 10u);
  EXPECT_FALSE(pools.embeddings_current);
  const auto& src = data.maps[pools.anomalous_image];
  EXPECT_EQ(pools.anomalous.rows(), src.PositiveCount());
  EXPECT_EQ(data.manifest.entries[pools.anomalous_image].kind, ImageKind::kAnomalous);
  EXPECT_EQ(data.manifest.entries[pools.anomalous_image].split, Split::kTrain);

  cfg.cap = 100000;
  cfg.N_images = 80;  // more than available: all 12 train normals
  const FeaturePools all = ResamplePools(data, cfg, bank, net, rng);
  EXPECT_EQ(all.normal.rows(), 12u * 36u);
}

TEST(ResampleTest, SingleAnomalousImageIsAlwaysChosen) {
  SynthSpec spec = SmallSpec();
  spec.n_anomalous = 1;
  const Dataset data = SynthGenerate(spec);
  Rng rng(8);
  const auto net = GaussianNet<float>({3, 4, 2}, rng);
  EnvConfig cfg;
  const FeaturePools a = ResamplePools(data, cfg, {}, net, rng);
  const FeaturePools b = ResamplePools(data, cfg, {}, net, rng);
  EXPECT_EQ(a.anomalous, b.anomalous);
}

TEST(ResampleTest, BankIsIgnoredWhenBoundarySelectionIsOff) {
  const Dataset data = SynthGenerate(SmallSpec());
  Rng init(9);
  const auto net = GaussianNet<float>({3, 4, 2}, init);
  EnvConfig cfg;
  cfg.N_images = 4;
  cfg.cap = 50;
  BoundaryBank full = BoundaryBank::Fill(data, 6);
  Rng r1(10), r2(10);
  const FeaturePools a = ResamplePools(data, cfg, {}, net, r1);
  const FeaturePools b = ResamplePools(data, cfg, full, net, r2);
  EXPECT_EQ(a.normal, b.normal);
  EXPECT_EQ(a.anomalous, b.anomalous);
}

TEST(ResampleTest, BoundarySelectionAppendsNearestCandidates) {
  const Dataset data = SynthGenerate(SmallSpec());
  Rng rng(12);
  const auto net = GaussianNet<float>({3, 4, 2}, rng);
  EnvConfig cfg;
  cfg.N_images = 2;
  cfg.bs_enabled = true;
  cfg.bs_K = 7;
  const BoundaryBank bank = BoundaryBank::Fill(data, 6);
  const FeaturePools pools = ResamplePools(data, cfg, bank, net, rng);
  EXPECT_EQ(pools.normal.rows(), 2u * 36u + 7u);
  EXPECT_THROW(ResamplePools(data, cfg, {}, net, rng), Error);
}

TEST(ResampleTest, MissingAnomaliesIsConfigError) {
  SynthSpec spec = SmallSpec();
  Dataset data = SynthGenerate(spec);
  Dataset normals_only;
  for (std::size_t i = 0; i < data.maps.size(); ++i) {
    if (data.manifest.entries[i].kind == ImageKind::kNormal) {
      normals_only.manifest.entries.push_back(data.manifest.entries[i]);
      normals_only.maps.push_back(data.maps[i]);
    }
  }
  Rng rng(1);
  const auto net = GaussianNet<float>({3, 4, 2}, rng);
  try {
    ResamplePools(normals_only, {}, {}, net, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(RefreshTest, CacheMatchesLiveEmbeddings) {
  Rng rng(13);
  const auto net = GaussianNet<float>({4, 6, 2}, rng);
  FeaturePools pools;
  for (int i = 0; i < 30; ++i) pools.normal.push_back(GaussianVector(4, rng));
  RefreshEmbeddings(pools, net);
  const FeatureMatrix first = pools.normal_embeddings;
  const auto version = pools.embed_version;
  RefreshEmbeddings(pools, net);
  EXPECT_EQ(pools.normal_embeddings, first);
  EXPECT_GT(pools.embed_version, version);
  ASSERT_EQ(first.rows(), pools.normal.rows());
  for (std::size_t i = 0; i < first.rows(); ++i) {
    const auto live = net.Embed(pools.normal.row(i));
    const auto cached = first.row(i);
    EXPECT_TRUE(std::equal(live.begin(), live.end(), cached.begin(), cached.end()));
  }
}

}  // namespace
}  // namespace dqad
