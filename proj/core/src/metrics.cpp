#include "reentry/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "reentry/errors.hpp"

namespace reentry {

nlohmann::json Metrics::to_json() const {
  nlohmann::json j = {{"f1", f1},         {"precision", precision}, {"recall", recall},
                      {"tp", tp},         {"fp", fp},               {"tn", tn},
                      {"fn", fn},         {"count", count()}};
  j["auc"] = auc ? nlohmann::json(*auc) : nlohmann::json(nullptr);
  return j;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of (1-based, tie-averaged) ranks of the positives.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("auc needs at least one positive and one negative label");
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

Metrics prf1(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("prf1: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("prf1: empty input");
  Metrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == 1;
    const bool gold = labels[i] == 1;
    if (pred && gold) ++m.tp;
    else if (pred) ++m.fp;
    else if (gold) ++m.fn;
    else ++m.tn;
  }
  const double tp = static_cast<double>(m.tp);
  m.precision = (m.tp + m.fp) == 0 ? 1.0 : tp / static_cast<double>(m.tp + m.fp);
  m.recall = (m.tp + m.fn) == 0 ? 0.0 : tp / static_cast<double>(m.tp + m.fn);
  const double pr = m.precision + m.recall;
  m.f1 = (m.tp == 0 || pr == 0.0) ? 0.0 : 2.0 * m.precision * m.recall / pr;
  return m;
}

std::vector<int> threshold_scores(std::span<const double> scores, double threshold) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(s > threshold ? 1 : 0);
  return out;
}

Metrics score_metrics(std::span<const double> scores, std::span<const int> labels, double threshold) {
  const auto predictions = threshold_scores(scores, threshold);
  Metrics m = prf1(predictions, labels);
  try {
    m.auc = auc(scores, labels);
  } catch (const UndefinedMetricError&) {
    m.auc.reset();
  }
  return m;
}

}  // namespace reentry
