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

#include "dqad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dqad/error.hpp"
#include "dqad/kernels.hpp"

namespace dqad {
namespace {

struct ClassCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

ClassCounts CountClasses(std::span<const double> scores,
                         std::span<const std::uint8_t> labels) {
  Require(scores.size() == labels.size(), ErrorKind::kInput,
          "scores and labels differ in length");
  ClassCounts counts;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    Require(std::isfinite(scores[i]), ErrorKind::kNumeric, "non-finite score");
    (labels[i] != 0 ? counts.positives : counts.negatives)++;
  }
  return counts;
}

// Indices sorted by descending score; equal scores stay in input order.
std::vector<std::size_t> DescendingOrder(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// Calls visit(threshold, tp, fp) once per distinct score, highest first, with
// the confusion counts of the prediction "score >= threshold".
template <typename Visit>
void SweepThresholds(std::span<const double> scores, std::span<const std::uint8_t> labels,
                     Visit visit) {
  const std::vector<std::size_t> order = DescendingOrder(scores);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      (labels[order[i]] != 0 ? tp : fp)++;
    }
    visit(threshold, tp, fp);
  }
}

}  // namespace

double AnomalyScoreFromQ(double q0, double q1) {
  Require(std::isfinite(q0) && std::isfinite(q1), ErrorKind::kNumeric,
          "non-finite Q-value");
  const double d = q1 - q0;
  double p;
  if (d >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-d));
  } else {
    const double e = std::exp(d);
    p = e / (1.0 + e);
  }
  return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

double AnomalyScore(const QNetwork& net, std::span<const float> state) {
  const auto q = net.Forward(state);
  return AnomalyScoreFromQ(q[0], q[1]);
}

double ScoreMap::ImageScore() const {
  Require(!values.empty(), ErrorKind::kInput, "empty score map");
  return *std::max_element(values.begin(), values.end());
}

ScoreMap ComputeScoreMap(const QNetwork& net, const AggregatedFeatureMap& map) {
  ScoreMap out;
  out.height = map.height;
  out.width = map.width;
  out.values = kernels::AnomalyScores(net, map.features, map.channels);
  return out;
}

double Auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const ClassCounts counts = CountClasses(scores, labels);
  Require(counts.positives > 0 && counts.negatives > 0, ErrorKind::kUndefinedMetric,
          "AUROC needs both positive and negative labels");
  // Sum over tie groups of positives * (negatives ranked strictly below +
  // half the negatives in the group).
  const std::vector<std::size_t> order = DescendingOrder(scores);
  double credit = 0.0;
  std::size_t negatives_above = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    std::size_t pos = 0, neg = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      (labels[order[i]] != 0 ? pos : neg)++;
    }
    const double below = static_cast<double>(counts.negatives - negatives_above - neg);
    credit += static_cast<double>(pos) * (below + 0.5 * static_cast<double>(neg));
    negatives_above += neg;
  }
  return credit / (static_cast<double>(counts.positives) *
                   static_cast<double>(counts.negatives));
}

double Auprc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const ClassCounts counts = CountClasses(scores, labels);
  Require(counts.positives > 0, ErrorKind::kUndefinedMetric,
          "AUPRC needs at least one positive label");
  const auto total_pos = static_cast<double>(counts.positives);
  double area = 0.0;
  double prev_recall = 0.0;
  SweepThresholds(scores, labels, [&](double, std::size_t tp, std::size_t fp) {
    const double recall = static_cast<double>(tp) / total_pos;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  });
  return area;
}

DiceResult MaxDice(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const ClassCounts counts = CountClasses(scores, labels);
  Require(counts.positives > 0, ErrorKind::kUndefinedMetric,
          "Dice needs at least one positive label");
  Require(counts.negatives > 0, ErrorKind::kUndefinedMetric,
          "specificity undefined without negative labels");
  DiceResult best;
  best.dice = -1.0;
  std::size_t best_tp = 0, best_fp = 0;
  SweepThresholds(scores, labels, [&](double threshold, std::size_t tp, std::size_t fp) {
    const std::size_t fn = counts.positives - tp;
    const double dice = 2.0 * static_cast<double>(tp) /
                        static_cast<double>(2 * tp + fp + fn);
    if (dice >= best.dice) {  // later thresholds are lower
      best.dice = dice;
      best.threshold = threshold;
      best_tp = tp;
      best_fp = fp;
    }
  });
  best.sensitivity = static_cast<double>(best_tp) / static_cast<double>(counts.positives);
  best.specificity = static_cast<double>(counts.negatives - best_fp) /
                     static_cast<double>(counts.negatives);
  return best;
}

LevelMetrics ComputeLevelMetrics(std::span<const double> scores,
                                 std::span<const std::uint8_t> labels) {
  LevelMetrics m;
  m.auroc = Auroc(scores, labels);
  m.auprc = Auprc(scores, labels);
  const DiceResult dice = MaxDice(scores, labels);
  m.max_dice = dice.dice;
  m.dice_threshold = dice.threshold;
  m.sensitivity = dice.sensitivity;
  m.specificity = dice.specificity;
  return m;
}

MetricsReport EvaluateScoreMaps(std::span<const ScoreMap> maps,
                                std::span<const AggregatedFeatureMap* const> truth) {
  Require(maps.size() == truth.size(), ErrorKind::kInput,
          "score maps and ground truth differ in count");
  Require(!maps.empty(), ErrorKind::kUndefinedMetric, "no images to evaluate");
  std::vector<double> image_scores, pixel_scores;
  std::vector<std::uint8_t> image_labels, pixel_labels;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const ScoreMap& s = maps[i];
    const AggregatedFeatureMap& t = *truth[i];
    Require(s.values.size() == t.mask.size(), ErrorKind::kInput,
            "score map does not align with its mask");
    image_scores.push_back(s.ImageScore());
    image_labels.push_back(t.PositiveCount() > 0 ? 1 : 0);
    pixel_scores.insert(pixel_scores.end(), s.values.begin(), s.values.end());
    for (std::uint8_t m : t.mask) pixel_labels.push_back(m != 0 ? 1 : 0);
  }
  MetricsReport report;
  report.image = ComputeLevelMetrics(image_scores, image_labels);
  report.pixel = ComputeLevelMetrics(pixel_scores, pixel_labels);
  report.n_images = maps.size();
  report.n_pixels = pixel_scores.size();
  return report;
}

MetricsReport Evaluate(const QNetwork& net, const Dataset& dataset, Split split) {
  const std::vector<std::size_t> indices = dataset.Select(split);
  Require(!indices.empty(), ErrorKind::kValidation,
          std::string("dataset has no ") + ToString(split) + " images");
  std::vector<ScoreMap> maps;
  std::vector<const AggregatedFeatureMap*> truth;
  for (std::size_t idx : indices) {
    maps.push_back(ComputeScoreMap(net, dataset.maps[idx]));
    truth.push_back(&dataset.maps[idx]);
  }
  return EvaluateScoreMaps(maps, truth);
}

nlohmann::json ReportToJson(const MetricsReport& report) {
  auto level = [](const LevelMetrics& m) {
    return nlohmann::json{{"AUROC", m.auroc},
                          {"AUPRC", m.auprc},
                          {"Sensitivity", m.sensitivity},
                          {"Specificity", m.specificity},
                          {"DICE", m.max_dice},
                          {"threshold", m.dice_threshold}};
  };
  return {{"image", level(report.image)},
          {"pixel", level(report.pixel)},
          {"n_images", report.n_images},
          {"n_pixels", report.n_pixels}};
}

}  // namespace dqad
