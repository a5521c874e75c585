#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace reentry {

struct Metrics {
  std::optional<double> auc;  // absent when labels hold a single class
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t count() const { return tp + fp + tn + fn; }
  nlohmann::json to_json() const;
};

// Probability that a random positive outscores a random negative, ties
// counted as one half. Computed from average ranks in O(n log n).
// Throws UndefinedMetricError unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

// Confusion-matrix metrics. Precision is 1 when nothing was predicted
// positive; F1 is 0 when precision + recall is 0.
Metrics prf1(std::span<const int> predictions, std::span<const int> labels);

std::vector<int> threshold_scores(std::span<const double> scores, double threshold);

// prf1 on thresholded scores plus AUC when defined.
Metrics score_metrics(std::span<const double> scores, std::span<const int> labels, double threshold);

}  // namespace reentry
