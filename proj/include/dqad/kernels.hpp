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

// Data-parallel kernels over feature pools.
//
// Each kernel has a serial reference in `serial::` and an OpenMP version in
// `parallel::`. Both produce bit-identical results: per-row work is done by a
// single thread in the same order, and argmin/argmax reductions combine
// (distance, index) pairs lexicographically so the lowest index wins ties.
// The unqualified entry points dispatch on MaxThreads().

#ifndef DQAD_KERNELS_HPP_
#define DQAD_KERNELS_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dqad/matrix.hpp"
#include "dqad/qnet.hpp"

namespace dqad::kernels {

// sqrt(sum (a_i - b_i)^2), accumulated in double.
double Euclidean(std::span<const float> a, std::span<const float> b);

enum class Extreme { kNearest, kFarthest };

// Worker cap: DQAD_THREADS if set, else the OpenMP default. 1 selects the
// serial kernels.
int MaxThreads();
void SetMaxThreads(int threads);
bool OpenMpEnabled();

namespace serial {
FeatureMatrix EmbedRows(const QNetwork& net, const FeatureMatrix& rows);
std::size_t ExtremeIndex(std::span<const float> query, const FeatureMatrix& pool,
                         Extreme extreme, std::optional<std::size_t> skip = {});
std::vector<double> MinDistances(const FeatureMatrix& candidates,
                                 const FeatureMatrix& bank);
std::vector<double> AnomalyScores(const QNetwork& net, std::span<const float> rows,
                                  std::size_t dim);
}  // namespace serial

namespace parallel {
FeatureMatrix EmbedRows(const QNetwork& net, const FeatureMatrix& rows);
std::size_t ExtremeIndex(std::span<const float> query, const FeatureMatrix& pool,
                         Extreme extreme, std::optional<std::size_t> skip = {});
std::vector<double> MinDistances(const FeatureMatrix& candidates,
                                 const FeatureMatrix& bank);
std::vector<double> AnomalyScores(const QNetwork& net, std::span<const float> rows,
                                  std::size_t dim);
}  // namespace parallel

// Embeds every row with the network's last hidden layer.
FeatureMatrix EmbedRows(const QNetwork& net, const FeatureMatrix& rows);

// Index of the pool row nearest to / farthest from `query`; ties go to the
// lowest index. `skip` excludes one row. Pool must have a candidate row.
std::size_t ExtremeIndex(std::span<const float> query, const FeatureMatrix& pool,
                         Extreme extreme, std::optional<std::size_t> skip = {});

// For each candidate row, the distance to its closest bank row.
std::vector<double> MinDistances(const FeatureMatrix& candidates,
                                 const FeatureMatrix& bank);

// Softmax anomaly probability for each `dim`-wide row of `rows`.
std::vector<double> AnomalyScores(const QNetwork& net, std::span<const float> rows,
                                  std::size_t dim);

}  // namespace dqad::kernels

#endif  // DQAD_KERNELS_HPP_
