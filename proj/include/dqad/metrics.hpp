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

// Anomaly scoring and detection metrics.

#ifndef DQAD_METRICS_HPP_
#define DQAD_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dqad/features.hpp"
#include "dqad/qnet.hpp"
#include "json.hpp"

namespace dqad {

// Softmax probability of a1, exp(q1) / (exp(q0) + exp(q1)), clamped into the
// open interval (0, 1).
double AnomalyScoreFromQ(double q0, double q1);
double AnomalyScore(const QNetwork& net, std::span<const float> state);

struct ScoreMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  // Image-level score: maximum pixel score.
  double ImageScore() const;
};

ScoreMap ComputeScoreMap(const QNetwork& net, const AggregatedFeatureMap& map);

// Mann-Whitney AUROC; tied positive/negative pairs count one half.
double Auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Average precision: sum over descending distinct thresholds of
// (recall_k - recall_{k-1}) * precision_k.
double Auprc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct DiceResult {
  double dice = 0.0;
  double threshold = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

// Best 2TP/(2TP+FP+FN) over thresholds t at the distinct scores, predicting
// score >= t. Ties keep the lowest threshold.
DiceResult MaxDice(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct LevelMetrics {
  double auroc = 0.0;
  double auprc = 0.0;
  double max_dice = 0.0;
  double dice_threshold = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

LevelMetrics ComputeLevelMetrics(std::span<const double> scores,
                                 std::span<const std::uint8_t> labels);

struct MetricsReport {
  LevelMetrics image;
  LevelMetrics pixel;
  std::size_t n_images = 0;
  std::size_t n_pixels = 0;
};

// Image label: mask has a positive pixel. Pixel labels: the masks.
MetricsReport EvaluateScoreMaps(std::span<const ScoreMap> maps,
                                std::span<const AggregatedFeatureMap* const> truth);

MetricsReport Evaluate(const QNetwork& net, const Dataset& dataset, Split split);

nlohmann::json ReportToJson(const MetricsReport& report);

}  // namespace dqad

#endif  // DQAD_METRICS_HPP_
