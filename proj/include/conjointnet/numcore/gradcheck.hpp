#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "conjointnet/numcore/layers.hpp"

namespace conjointnet {

// Objective used by grad_check. With accumulate == true it must run a full
// forward/backward pass that adds d(loss)/d(param) into every Parameter::grad;
// with accumulate == false it only evaluates the loss. Any randomness inside
// must be re-seeded per call so repeated evaluations see the same function.
using GradObjective = std::function<double(bool accumulate)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

// Central finite differences against analytic gradients. Relative error uses
// the denominator max(|analytic|, |numeric|, 1e-6); the floor keeps
// cancellation noise on gradients that are exactly zero (a bias feeding
// BatchNorm) from reading as a large relative error.
inline GradCheckResult grad_check_detailed(std::span<Parameter* const> params, const GradObjective& objective,
                                           double step = 1e-5) {
  for (Parameter* p : params) p->zero_grad();
  objective(true);
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i]->value.data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + step;
      const double plus = objective(false);
      values[k] = saved - step;
      const double minus = objective(false);
      values[k] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[i].data()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
      ++result.checked;
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return result;
}

inline double grad_check(std::span<Parameter* const> params, const GradObjective& objective, double step = 1e-5) {
  return grad_check_detailed(params, objective, step).max_relative_error;
}

}  // namespace conjointnet
