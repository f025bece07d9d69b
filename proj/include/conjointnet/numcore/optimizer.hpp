#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "conjointnet/numcore/layers.hpp"

namespace conjointnet {

enum class OptimizerKind { SGD, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "adam" || s == "Adam") return OptimizerKind::Adam;
  if (s == "sgd" || s == "SGD") return OptimizerKind::SGD;
  throw ValidationError("unknown optimizer '" + s + "'");
}

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

// Moments are matched to parameters by position, so callers must pass the same
// parameter list (same order) on every step.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {
    if (!(config_.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  }

  const OptimizerConfig& config() const { return config_; }
  std::size_t step_count() const { return steps_; }

  void step(std::span<Parameter* const> params) {
    if (config_.kind == OptimizerKind::Adam) bind_moments(params);
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double bc1 = 1.0 - std::pow(config_.beta1, t);
    const double bc2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter& p = *params[i];
      if (!p.frozen) {
        const double lr = config_.learning_rate * p.lr_scale;
        auto w = p.value.data();
        const auto g = p.grad.data();
        if (config_.kind == OptimizerKind::SGD) {
          for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * g[k];
        } else {
          auto m = first_[i].data();
          auto v = second_[i].data();
          for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
            v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
            w[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + config_.epsilon);
          }
        }
      }
      p.zero_grad();
    }
  }

 private:
  void bind_moments(std::span<Parameter* const> params) {
    if (first_.empty()) {
      for (const Parameter* p : params) {
        first_.emplace_back(p->value.rows(), p->value.cols());
        second_.emplace_back(p->value.rows(), p->value.cols());
      }
      return;
    }
    if (first_.size() != params.size())
      throw ShapeError("optimizer: parameter list changed size between steps");
    for (std::size_t i = 0; i < params.size(); ++i)
      if (!first_[i].same_shape(params[i]->value))
        throw ShapeError("optimizer: moment shape mismatch for parameter '" + params[i]->name + "'");
  }

  OptimizerConfig config_;
  std::size_t steps_ = 0;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
};

}  // namespace conjointnet
