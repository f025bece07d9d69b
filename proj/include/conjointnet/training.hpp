#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "conjointnet/harness/metrics.hpp"
#include "conjointnet/numcore/losses.hpp"
#include "conjointnet/numcore/optimizer.hpp"

namespace conjointnet {

// Labeled choices in matrix form: options[k] holds the one-hot rows of the k-th
// presented option (a single entry for single-vector data).
struct ChoiceBatch {
  std::vector<Matrix> options;
  std::vector<int> targets;

  std::size_t size() const { return targets.size(); }
  std::size_t option_count() const { return options.size(); }

  ChoiceBatch subset(std::span<const std::size_t> indices) const {
    ChoiceBatch out;
    for (const auto& m : options) out.options.push_back(take_rows(m, indices));
    for (std::size_t i : indices) out.targets.push_back(targets.at(i));
    return out;
  }

  Matrix target_matrix() const {
    Matrix t(targets.size(), 1);
    for (std::size_t i = 0; i < targets.size(); ++i) t(i, 0) = targets[i];
    return t;
  }

  // A beats B becomes B beats A with the label flipped (two options only).
  ChoiceBatch swapped() const {
    if (options.size() != 2) throw ValidationError("swapped(): needs exactly two options");
    ChoiceBatch out{{options[1], options[0]}, {}};
    for (int t : targets) out.targets.push_back(1 - t);
    return out;
  }

  void append(const ChoiceBatch& other) {
    if (options.empty()) {
      *this = other;
      return;
    }
    if (other.options.size() != options.size()) throw ShapeError("append: option count mismatch");
    for (std::size_t k = 0; k < options.size(); ++k) {
      const Matrix parts[] = {options[k], other.options[k]};
      options[k] = vstack(parts);
    }
    targets.insert(targets.end(), other.targets.begin(), other.targets.end());
  }
};

struct TrainConfig {
  std::size_t max_epochs = 100;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = std::numeric_limits<double>::quiet_NaN();
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct TrainReport {
  std::string model;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  // "val_accuracy", "val_loss" or "final"
  std::string selection;
  bool loss_trend_decreasing = false;
  std::optional<MetricSet> test;
  std::vector<double> test_scores;
  std::vector<int> test_targets;
  nlohmann::json extra = nlohmann::json::object();

  void finalize_trend() {
    loss_trend_decreasing = history.size() >= 2 && history.back().train_loss < history.front().train_loss;
  }
};

inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline double number_from_json(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline nlohmann::json report_to_json(const TrainReport& r) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& e : r.history)
    history.push_back({{"epoch", e.epoch},
                       {"train_loss", number_or_null(e.train_loss)},
                       {"train_accuracy", number_or_null(e.train_accuracy)},
                       {"val_loss", number_or_null(e.val_loss)},
                       {"val_accuracy", number_or_null(e.val_accuracy)}});
  nlohmann::json j{{"format", "conjointnet-report"},
                   {"version", 1},
                   {"model", r.model},
                   {"history", history},
                   {"best_epoch", r.best_epoch},
                   {"selection", r.selection},
                   {"loss_trend_decreasing", r.loss_trend_decreasing},
                   {"extra", r.extra}};
  if (r.test) {
    j["test"] = metrics_to_json(*r.test);
    j["test_scores"] = r.test_scores;
    j["test_targets"] = r.test_targets;
  }
  return j;
}

inline TrainReport report_from_json(const nlohmann::json& j) {
  try {
    TrainReport r;
    r.model = j.at("model").get<std::string>();
    for (const auto& e : j.at("history"))
      r.history.push_back({e.at("epoch").get<std::size_t>(), number_from_json(e.at("train_loss")),
                           number_from_json(e.at("train_accuracy")), number_from_json(e.at("val_loss")),
                           number_from_json(e.at("val_accuracy"))});
    r.best_epoch = j.at("best_epoch").get<std::size_t>();
    r.selection = j.value("selection", "");
    r.loss_trend_decreasing = j.value("loss_trend_decreasing", false);
    if (j.contains("test")) {
      r.test = metrics_from_json(j.at("test"));
      r.test_scores = j.value("test_scores", std::vector<double>{});
      r.test_targets = j.value("test_targets", std::vector<int>{});
    }
    r.extra = j.value("extra", nlohmann::json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

inline std::vector<double> sigmoid_scores(const Matrix& logits) {
  std::vector<double> out;
  out.reserve(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) out.push_back(sigmoid(logits(r, 0)));
  return out;
}

// Shuffled mini-batch index lists for one epoch.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  return out;
}

struct ClassifierEval {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> scores;
};

template <class Model>
ClassifierEval evaluate_classifier(const Model& model, const ChoiceBatch& data) {
  const Matrix logits = model.logits(data);
  ClassifierEval out;
  out.loss = bce_with_logits(logits, data.target_matrix()).loss;
  out.scores = sigmoid_scores(logits);
  out.accuracy = accuracy(threshold_labels(out.scores), data.targets);
  return out;
}

// Mini-batch BCE training for any choice model exposing
//   std::vector<Parameter*> parameters();
//   double train_step(const ChoiceBatch&);   // forward + backward, grads accumulated
//   Matrix logits(const ChoiceBatch&) const; // Infer mode, one logit per row
// The model is left at the epoch with the best validation accuracy (earliest on ties);
// without validation data the last epoch is kept.
template <class Model>
TrainReport train_classifier(Model& model, const ChoiceBatch& train, const ChoiceBatch& val, const TrainConfig& config,
                             const std::string& name) {
  if (train.size() == 0) throw ValidationError("training set is empty");
  if (config.max_epochs == 0) throw ValidationError("max_epochs must be positive");
  Rng rng(config.seed);
  Optimizer optimizer(config.optimizer);
  for (auto* p : model.parameters()) p->zero_grad();

  TrainReport report;
  report.model = name;
  report.selection = val.size() > 0 ? "val_accuracy" : "final";
  std::optional<Model> best;
  double best_accuracy = -1.0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& idx : epoch_batches(train.size(), config.batch_size, rng)) {
      const double loss = model.train_step(train.subset(idx));
      if (!std::isfinite(loss))
        throw NumericError(name + ": non-finite training loss at epoch " + std::to_string(epoch));
      loss_sum += loss * static_cast<double>(idx.size());
      auto params = model.parameters();
      optimizer.step(params);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.train_accuracy = evaluate_classifier(model, train).accuracy;
    if (val.size() > 0) {
      const auto v = evaluate_classifier(model, val);
      rec.val_loss = v.loss;
      rec.val_accuracy = v.accuracy;
      if (v.accuracy > best_accuracy) {
        best_accuracy = v.accuracy;
        best = model;
        report.best_epoch = epoch;
      }
    }
    report.history.push_back(rec);
  }
  if (best) {
    model = std::move(*best);
  } else {
    report.best_epoch = config.max_epochs;
  }
  report.finalize_trend();
  return report;
}

}  // namespace conjointnet
