#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "conjointnet/errors.hpp"

namespace conjointnet {

struct MetricSet {
  double accuracy = 0.0;
  double auc = 0.0;
  std::size_t n = 0;

  friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

inline void check_binary(std::span<const int> targets, const char* what) {
  for (int t : targets)
    if (t != 0 && t != 1) throw ValidationError(std::string(what) + ": target " + std::to_string(t) + " not in {0,1}");
}

// Fraction of positions where preds == targets.
inline double accuracy(std::span<const int> preds, std::span<const int> targets) {
  if (preds.size() != targets.size()) throw ValidationError("accuracy: length mismatch");
  if (preds.empty()) throw ValidationError("accuracy: empty input");
  check_binary(targets, "accuracy");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == targets[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

// Labels at threshold 0.5 (ties go to 1).
inline std::vector<int> threshold_labels(std::span<const double> scores, double threshold = 0.5) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(s >= threshold ? 1 : 0);
  return out;
}

// Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie), via average ranks.
inline double auc(std::span<const double> scores, std::span<const int> targets) {
  if (scores.size() != targets.size()) throw ValidationError("auc: length mismatch");
  check_binary(targets, "auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double n_pos = 0.0;
  for (int t : targets) n_pos += t;
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw ValidationError("auc: undefined with a single class present");

  // Sum of (1-based, tie-averaged) ranks of the positives.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (targets[order[k]] == 1) rank_sum += avg_rank;
    i = j;
  }
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

inline MetricSet evaluate_scores(std::span<const double> scores, std::span<const int> targets) {
  MetricSet m;
  m.n = scores.size();
  const auto labels = threshold_labels(scores);
  m.accuracy = accuracy(labels, targets);
  m.auc = auc(scores, targets);
  return m;
}

// Like evaluate_scores, but a single-class target set yields auc = NaN instead of throwing.
inline MetricSet evaluate_scores_lenient(std::span<const double> scores, std::span<const int> targets) {
  MetricSet m;
  m.n = scores.size();
  m.accuracy = accuracy(threshold_labels(scores), targets);
  const auto pos = std::count(targets.begin(), targets.end(), 1);
  m.auc = pos == 0 || static_cast<std::size_t>(pos) == targets.size() ? std::numeric_limits<double>::quiet_NaN()
                                                                       : auc(scores, targets);
  return m;
}

// An undefined AUC is stored as null.
inline nlohmann::json metrics_to_json(const MetricSet& m) {
  return nlohmann::json{
      {"accuracy", m.accuracy}, {"auc", std::isfinite(m.auc) ? nlohmann::json(m.auc) : nlohmann::json()}, {"n", m.n}};
}

inline MetricSet metrics_from_json(const nlohmann::json& j) {
  const auto& a = j.at("auc");
  return MetricSet{j.at("accuracy").get<double>(),
                   a.is_null() ? std::numeric_limits<double>::quiet_NaN() : a.get<double>(), j.at("n").get<std::size_t>()};
}

}  // namespace conjointnet
