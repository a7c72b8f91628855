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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dqad/error.hpp"

namespace dqad {

void EnvConfig::Validate() const {
  Require(beta_exploit >= 0.0 && beta_exploit <= 1.0, ErrorKind::kConfig,
          "beta_exploit must lie in [0, 1]");
  Require(N_images > 0, ErrorKind::kConfig, "N_images must be positive");
  Require(cap > 0, ErrorKind::kConfig, "cap must be positive");
  Require(bs_bank_size > 0, ErrorKind::kConfig, "bs_bank_size must be positive");
  Require(bs_K > 0, ErrorKind::kConfig, "bs_K must be positive");
}

BoundaryBank BoundaryBank::Fill(const Dataset& dataset, std::size_t bank_size) {
  BoundaryBank bank;
  for (std::size_t idx : dataset.Select(Split::kTrain, ImageKind::kAnomalous)) {
    const AggregatedFeatureMap& map = dataset.maps[idx];
    for (std::size_t p = 0; p < map.positions(); ++p) {
      if (bank.features.rows() == bank_size) return bank;
      if (map.mask[p] != 0) bank.features.push_back(map.position(p));
    }
  }
  return bank;
}

int Reward(Action action, std::uint8_t gt) {
  const bool predicted_anomalous = action == Action::kAnomalous;
  if (gt != 0) return predicted_anomalous ? 1 : -1;
  return predicted_anomalous ? -2 : 0;
}

EnvStep ExploitAnomalous(const FeaturePools& pools, Rng& rng) {
  Require(!pools.anomalous.empty(), ErrorKind::kState, "anomalous pool is empty");
  const std::size_t i = UniformIndex(rng, pools.anomalous.rows());
  const auto row = pools.anomalous.row(i);
  return {{std::vector<float>(row.begin(), row.end()), 1},
          StateSource::kAnomalousPool, i};
}

EnvStep ExploreNormal(std::span<const float> state, Action action,
                      const FeaturePools& pools, const QNetwork& net, bool exclude_self) {
  Require(!pools.normal.empty(), ErrorKind::kState, "normal pool is empty");
  Require(pools.embeddings_current &&
              pools.normal_embeddings.rows() == pools.normal.rows(),
          ErrorKind::kState, "normal pool embeddings are stale");
  std::optional<std::size_t> skip;
  if (exclude_self) {
    for (std::size_t i = 0; i < pools.normal.rows(); ++i) {
      const auto row = pools.normal.row(i);
      if (std::equal(row.begin(), row.end(), state.begin(), state.end())) {
        skip = i;
        break;
      }
    }
  }
  const std::vector<float> query = net.Embed(state);
  const auto extreme = action == Action::kAnomalous ? kernels::Extreme::kNearest
                                                    : kernels::Extreme::kFarthest;
  const std::size_t i =
      kernels::ExtremeIndex(query, pools.normal_embeddings, extreme, skip);
  const auto row = pools.normal.row(i);
  return {{std::vector<float>(row.begin(), row.end()), 0}, StateSource::kNormalPool, i};
}

EnvStep NextState(std::span<const float> state, Action action, const FeaturePools& pools,
                  const QNetwork& net, const EnvConfig& config, Rng& rng) {
  if (Bernoulli(rng, config.beta_exploit)) return ExploitAnomalous(pools, rng);
  return ExploreNormal(state, action, pools, net, config.exclude_self);
}

std::vector<std::size_t> BoundarySelect(const BoundaryBank& bank,
                                        const FeatureMatrix& normal_features,
                                        const QNetwork& net, std::size_t k) {
  Require(!bank.features.empty(), ErrorKind::kState, "boundary bank is empty");
  Require(k <= normal_features.rows(), ErrorKind::kInput,
          "K exceeds the number of normal features");
  const FeatureMatrix bank_emb = kernels::EmbedRows(net, bank.features);
  const FeatureMatrix normal_emb = kernels::EmbedRows(net, normal_features);
  const std::vector<double> dist = kernels::MinDistances(normal_emb, bank_emb);
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  order.resize(k);
  return order;
}

FeaturePools ResamplePools(const Dataset& dataset, const EnvConfig& config,
                           const BoundaryBank& bank, const QNetwork& net, Rng& rng) {
  config.Validate();
  const auto anomalous = dataset.Select(Split::kTrain, ImageKind::kAnomalous);
  const auto normal = dataset.Select(Split::kTrain, ImageKind::kNormal);
  Require(!anomalous.empty(), ErrorKind::kConfig,
          "training split needs at least one labeled anomalous image");
  Require(!normal.empty(), ErrorKind::kConfig,
          "training split needs at least one normal image");

  FeaturePools pools;
  pools.anomalous_image = anomalous[UniformIndex(rng, anomalous.size())];
  const AggregatedFeatureMap& source = dataset.maps[pools.anomalous_image];
  for (std::size_t p = 0; p < source.positions(); ++p) {
    if (source.mask[p] != 0) pools.anomalous.push_back(source.position(p));
  }
  Require(!pools.anomalous.empty(), ErrorKind::kValidation,
          dataset.manifest.entries[pools.anomalous_image].path +
              ": anomalous image has an empty mask");

  std::vector<std::size_t> chosen;
  std::sample(normal.begin(), normal.end(), std::back_inserter(chosen),
              std::min(config.N_images, normal.size()), rng);
  FeatureMatrix pooled;
  for (std::size_t idx : chosen) {
    const AggregatedFeatureMap& map = dataset.maps[idx];
    for (std::size_t p = 0; p < map.positions(); ++p) pooled.push_back(map.position(p));
  }

  if (config.bs_enabled) {
    Require(!bank.features.empty(), ErrorKind::kState,
            "boundary selection enabled with an empty bank");
    FeatureMatrix candidates;
    for (std::size_t idx : anomalous) {
      const AggregatedFeatureMap& map = dataset.maps[idx];
      for (std::size_t p = 0; p < map.positions(); ++p) {
        if (map.mask[p] == 0) candidates.push_back(map.position(p));
      }
    }
    if (!candidates.empty()) {
      const std::size_t k = std::min(config.bs_K, candidates.rows());
      for (std::size_t i : BoundarySelect(bank, candidates, net, k)) {
        pooled.push_back(candidates.row(i));
      }
    }
  }

  if (pooled.rows() > config.cap) {
    std::vector<std::size_t> all(pooled.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> keep;
    std::sample(all.begin(), all.end(), std::back_inserter(keep), config.cap, rng);
    FeatureMatrix capped;
    capped.reserve(config.cap);
    for (std::size_t i : keep) capped.push_back(pooled.row(i));
    pooled = std::move(capped);
  }
  pools.normal = std::move(pooled);
  pools.embeddings_current = false;
  return pools;
}

void RefreshEmbeddings(FeaturePools& pools, const QNetwork& net) {
  pools.normal_embeddings = kernels::EmbedRows(net, pools.normal);
  ++pools.embed_version;
  pools.embeddings_current = true;
}

}  // namespace dqad
