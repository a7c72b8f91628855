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

// The training environment: labeled anomalous pool S^a, subsampled normal
// pool S^u with an embedding cache, rewards, and next-state generation by
// exploitation (uniform draw from S^a) or exploration (nearest / farthest
// normal neighbor in the agent's embedding space).

#ifndef DQAD_ENVIRONMENT_HPP_
#define DQAD_ENVIRONMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dqad/features.hpp"
#include "dqad/kernels.hpp"
#include "dqad/matrix.hpp"
#include "dqad/qnet.hpp"
#include "dqad/random.hpp"

namespace dqad {

using kernels::Euclidean;

struct EnvConfig {
  double beta_exploit = 0.5;     // probability of exploiting S^a
  std::size_t N_images = 80;     // normal images per resample
  std::size_t cap = 100000;      // |S^u| bound
  bool bs_enabled = false;
  std::size_t bs_bank_size = 1000;
  std::size_t bs_K = 1000;
  bool exclude_self = false;     // g_u never returns s_t itself

  void Validate() const;
};

struct FeaturePools {
  FeatureMatrix anomalous;          // S^a
  FeatureMatrix normal;             // S^u
  FeatureMatrix normal_embeddings;  // cache, row-aligned with `normal`
  std::uint64_t embed_version = 0;
  bool embeddings_current = false;
  std::size_t anomalous_image = 0;  // dataset index the S^a came from
};

// Anomalous features kept for boundary-near normal selection.
struct BoundaryBank {
  FeatureMatrix features;

  // The first `bank_size` anomalous-labeled positions of the training
  // anomalous images, in dataset order.
  static BoundaryBank Fill(const Dataset& dataset, std::size_t bank_size);
};

// (a1,1) -> 1, (a0,1) -> -1, (a1,0) -> -2, (a0,0) -> 0.
int Reward(Action action, std::uint8_t gt);

enum class StateSource { kAnomalousPool, kNormalPool };

struct EnvStep {
  LabeledFeature feature;
  StateSource source = StateSource::kNormalPool;
  std::size_t pool_index = 0;
};

// g_a: uniform draw from S^a, gt = 1.
EnvStep ExploitAnomalous(const FeaturePools& pools, Rng& rng);

// g_u: for a1 the S^u element nearest to s_t in embedding space, for a0 the
// farthest. gt = 0. Requires a current embedding cache built with `net`.
EnvStep ExploreNormal(std::span<const float> state, Action action,
                      const FeaturePools& pools, const QNetwork& net,
                      bool exclude_self = false);

// One uniform draw decides g_a (probability beta_exploit) versus g_u.
EnvStep NextState(std::span<const float> state, Action action,
                  const FeaturePools& pools, const QNetwork& net,
                  const EnvConfig& config, Rng& rng);

// Indices of the K normal features closest to any bank feature in embedding
// space, ordered by (distance, index).
std::vector<std::size_t> BoundarySelect(const BoundaryBank& bank,
                                        const FeatureMatrix& normal_features,
                                        const QNetwork& net, std::size_t k);

// Draw order: anomalous image, normal image subset, downsample subset.
// S^a holds the anomalous-labeled positions of one training anomalous image;
// S^u pools the positions of N training normal images, plus (BS enabled)
// the bs_K normal-labeled positions of the training anomalous images closest
// to the bank, uniformly downsampled to `cap`. Embeddings are left stale.
FeaturePools ResamplePools(const Dataset& dataset, const EnvConfig& config,
                           const BoundaryBank& bank, const QNetwork& net, Rng& rng);

void RefreshEmbeddings(FeaturePools& pools, const QNetwork& net);

}  // namespace dqad

#endif  // DQAD_ENVIRONMENT_HPP_
