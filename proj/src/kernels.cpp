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

#include "dqad/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#ifdef DQAD_WITH_OPENMP
#include <omp.h>
#endif

#include "dqad/error.hpp"
#include "dqad/metrics.hpp"

namespace dqad::kernels {
namespace {

int g_max_threads = 0;  // 0: not yet resolved

int DefaultThreads() {
#ifdef DQAD_WITH_OPENMP
  int threads = omp_get_max_threads();
  if (const char* env = std::getenv("DQAD_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) {
      threads = static_cast<int>(std::min<long>(value, threads));
    }
  }
  return threads > 0 ? threads : 1;
#else
  return 1;
#endif
}

struct Best {
  double distance;
  std::size_t index;
};

// Strictly better, or equally good with a lower index.
bool Improves(const Best& candidate, const Best& incumbent, Extreme extreme) {
  if (candidate.index == std::numeric_limits<std::size_t>::max()) return false;
  if (incumbent.index == std::numeric_limits<std::size_t>::max()) return true;
  if (candidate.distance == incumbent.distance) return candidate.index < incumbent.index;
  return extreme == Extreme::kNearest ? candidate.distance < incumbent.distance
                                      : candidate.distance > incumbent.distance;
}

constexpr Best kNoBest{0.0, std::numeric_limits<std::size_t>::max()};

void CheckPool(std::span<const float> query, const FeatureMatrix& pool,
               std::optional<std::size_t> skip) {
  Require(!pool.empty(), ErrorKind::kState, "neighbor search over an empty pool");
  Require(query.size() == pool.cols(), ErrorKind::kInput,
          "query dimension does not match pool");
  Require(!(skip && pool.rows() == 1 && *skip == 0), ErrorKind::kState,
          "neighbor search has no candidate after excluding the query");
}

double RowScore(const QNetwork& net, std::span<const float> row) {
  const auto q = net.Forward(row);
  return AnomalyScoreFromQ(q[0], q[1]);
}

}  // namespace

double Euclidean(std::span<const float> a, std::span<const float> b) {
  Require(a.size() == b.size(), ErrorKind::kInput, "distance between unequal dimensions");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

int MaxThreads() {
  if (g_max_threads == 0) g_max_threads = DefaultThreads();
  return g_max_threads;
}

void SetMaxThreads(int threads) { g_max_threads = threads > 0 ? threads : 1; }

bool OpenMpEnabled() {
#ifdef DQAD_WITH_OPENMP
  return true;
#else
  return false;
#endif
}

// ---------------------------------------------------------------------------

namespace serial {

FeatureMatrix EmbedRows(const QNetwork& net, const FeatureMatrix& rows) {
  FeatureMatrix out(rows.rows(), net.embedding_size());
  for (std::size_t i = 0; i < rows.rows(); ++i) net.EmbedInto(rows.row(i), out.row(i));
  return out;
}

std::size_t ExtremeIndex(std::span<const float> query, const FeatureMatrix& pool,
                         Extreme extreme, std::optional<std::size_t> skip) {
  CheckPool(query, pool, skip);
  Best best = kNoBest;
  for (std::size_t i = 0; i < pool.rows(); ++i) {
    if (skip && *skip == i) continue;
    const Best candidate{Euclidean(query, pool.row(i)), i};
    if (Improves(candidate, best, extreme)) best = candidate;
  }
  return best.index;
}

std::vector<double> MinDistances(const FeatureMatrix& candidates,
                                 const FeatureMatrix& bank) {
  Require(!bank.empty(), ErrorKind::kState, "empty boundary bank");
  std::vector<double> out(candidates.rows());
  for (std::size_t i = 0; i < candidates.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < bank.rows(); ++j) {
      best = std::min(best, Euclidean(candidates.row(i), bank.row(j)));
    }
    out[i] = best;
  }
  return out;
}

std::vector<double> AnomalyScores(const QNetwork& net, std::span<const float> rows,
                                  std::size_t dim) {
  Require(dim > 0 && rows.size() % dim == 0, ErrorKind::kInput,
          "row buffer is not a multiple of the row width");
  const std::size_t n = rows.size() / dim;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = RowScore(net, rows.subspan(i * dim, dim));
  return out;
}

}  // namespace serial

// ---------------------------------------------------------------------------

namespace parallel {

FeatureMatrix EmbedRows(const QNetwork& net, const FeatureMatrix& rows) {
  FeatureMatrix out(rows.rows(), net.embedding_size());
  if (rows.rows() > 0) net.EmbedInto(rows.row(0), out.row(0));  // validates shapes
  const auto n = static_cast<std::ptrdiff_t>(rows.rows());
#pragma omp parallel for schedule(static) num_threads(MaxThreads())
  for (std::ptrdiff_t i = 1; i < n; ++i) {
    net.EmbedInto(rows.row(static_cast<std::size_t>(i)), out.row(static_cast<std::size_t>(i)));
  }
  return out;
}

std::size_t ExtremeIndex(std::span<const float> query, const FeatureMatrix& pool,
                         Extreme extreme, std::optional<std::size_t> skip) {
  CheckPool(query, pool, skip);
  Best best = kNoBest;
  const auto n = static_cast<std::ptrdiff_t>(pool.rows());
#pragma omp parallel num_threads(MaxThreads())
  {
    Best local = kNoBest;
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      const auto i = static_cast<std::size_t>(k);
      if (skip && *skip == i) continue;
      const Best candidate{Euclidean(query, pool.row(i)), i};
      if (Improves(candidate, local, extreme)) local = candidate;
    }
#pragma omp critical(dqad_extreme_index)
    {
      if (Improves(local, best, extreme)) best = local;
    }
  }
  return best.index;
}

std::vector<double> MinDistances(const FeatureMatrix& candidates,
                                 const FeatureMatrix& bank) {
  Require(!bank.empty(), ErrorKind::kState, "empty boundary bank");
  Require(candidates.empty() || candidates.cols() == bank.cols(), ErrorKind::kInput,
          "candidate and bank dimensions differ");
  std::vector<double> out(candidates.rows());
  const auto n = static_cast<std::ptrdiff_t>(candidates.rows());
#pragma omp parallel for schedule(static) num_threads(MaxThreads())
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < bank.rows(); ++j) {
      best = std::min(best, Euclidean(candidates.row(i), bank.row(j)));
    }
    out[i] = best;
  }
  return out;
}

std::vector<double> AnomalyScores(const QNetwork& net, std::span<const float> rows,
                                  std::size_t dim) {
  Require(dim > 0 && rows.size() % dim == 0, ErrorKind::kInput,
          "row buffer is not a multiple of the row width");
  Require(dim == net.input_size(), ErrorKind::kInput,
          "row width does not match network input");
  const std::size_t n = rows.size() / dim;
  std::vector<double> out(n);
  // Non-finite Q-values are reported after the parallel region.
  bool failed = false;
#pragma omp parallel for schedule(static) num_threads(MaxThreads()) reduction(|| : failed)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n); ++k) {
    const auto i = static_cast<std::size_t>(k);
    const auto q = net.Forward(rows.subspan(i * dim, dim));
    if (!std::isfinite(q[0]) || !std::isfinite(q[1])) {
      failed = true;
      out[i] = 0.5;
    } else {
      out[i] = AnomalyScoreFromQ(q[0], q[1]);
    }
  }
  Require(!failed, ErrorKind::kNumeric, "non-finite Q-value while scoring");
  return out;
}

}  // namespace parallel

// ---------------------------------------------------------------------------

FeatureMatrix EmbedRows(const QNetwork& net, const FeatureMatrix& rows) {
  return MaxThreads() > 1 ? parallel::EmbedRows(net, rows) : serial::EmbedRows(net, rows);
}

std::size_t ExtremeIndex(std::span<const float> query, const FeatureMatrix& pool,
                         Extreme extreme, std::optional<std::size_t> skip) {
  return MaxThreads() > 1 ? parallel::ExtremeIndex(query, pool, extreme, skip)
                          : serial::ExtremeIndex(query, pool, extreme, skip);
}

std::vector<double> MinDistances(const FeatureMatrix& candidates, const FeatureMatrix& bank) {
  return MaxThreads() > 1 ? parallel::MinDistances(candidates, bank)
                          : serial::MinDistances(candidates, bank);
}

std::vector<double> AnomalyScores(const QNetwork& net, std::span<const float> rows,
                                  std::size_t dim) {
  return MaxThreads() > 1 ? parallel::AnomalyScores(net, rows, dim)
                          : serial::AnomalyScores(net, rows, dim);
}

}  // namespace dqad::kernels
