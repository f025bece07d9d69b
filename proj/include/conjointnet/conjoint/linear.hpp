#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "conjointnet/conjoint/partworths.hpp"
#include "conjointnet/training.hpp"

namespace conjointnet {

enum class Pairing { Pairwise, SingleVector };

inline const char* to_string(Pairing p) { return p == Pairing::Pairwise ? "pairwise" : "single"; }

inline Pairing pairing_from_string(const std::string& s) {
  if (s == "pairwise") return Pairing::Pairwise;
  if (s == "single" || s == "single_vector") return Pairing::SingleVector;
  throw ValidationError("unknown pairing '" + s + "'");
}

// y = 1: option A was chosen.
struct ChoicePair {
  ItemVector a;
  ItemVector b;
  int y = 0;
};

struct LabeledItem {
  ItemVector x;
  int y = 0;
};

struct FitConfig {
  double l2 = 1e-4;
  std::size_t max_iterations = 100;
  // Stop once the largest gradient component falls below this.
  double tolerance = 1e-9;
};

struct FitResult {
  PartworthTable partworths;  // effects-coded
  double intercept = 0.0;     // single-vector fits only
  bool converged = false;
  std::size_t iterations = 0;
  double final_loss = 0.0;
  bool degenerate_targets = false;  // every target identical
  std::vector<double> loss_history;
};

namespace detail {

// Sparse design row: (column, value) pairs.
using SparseRow = std::vector<std::pair<std::size_t, double>>;

struct LogitProblem {
  std::vector<SparseRow> rows;
  std::vector<int> y;
  std::size_t dim = 0;
  bool intercept = false;  // last column, not penalized
};

inline double logit_objective(const LogitProblem& p, const Eigen::VectorXd& w, double l2) {
  double loss = 0.0;
  for (std::size_t n = 0; n < p.rows.size(); ++n) {
    double z = 0.0;
    for (const auto& [c, v] : p.rows[n]) z += w[static_cast<Eigen::Index>(c)] * v;
    loss += p.y[n] == 1 ? softplus(-z) : softplus(z);
  }
  loss /= static_cast<double>(p.rows.size());
  const std::size_t penalized = p.intercept ? p.dim - 1 : p.dim;
  for (std::size_t k = 0; k < penalized; ++k) loss += l2 * w[static_cast<Eigen::Index>(k)] * w[static_cast<Eigen::Index>(k)];
  return loss;
}

// Damped Newton with Armijo backtracking on mean logistic loss + l2 * ||w||^2.
inline Eigen::VectorXd solve_logit(const LogitProblem& p, const FitConfig& cfg, FitResult& result) {
  const auto dim = static_cast<Eigen::Index>(p.dim);
  const double inv_n = 1.0 / static_cast<double>(p.rows.size());
  const std::size_t penalized = p.intercept ? p.dim - 1 : p.dim;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  double loss = logit_objective(p, w, cfg.l2);
  result.loss_history.push_back(loss);

  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t n = 0; n < p.rows.size(); ++n) {
      const auto& row = p.rows[n];
      double z = 0.0;
      for (const auto& [c, v] : row) z += w[static_cast<Eigen::Index>(c)] * v;
      const double s = sigmoid(z);
      const double r = (s - p.y[n]) * inv_n;
      const double h = s * (1.0 - s) * inv_n;
      for (const auto& [c, v] : row) {
        grad[static_cast<Eigen::Index>(c)] += r * v;
        for (const auto& [c2, v2] : row) hess(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c2)) += h * v * v2;
      }
    }
    for (std::size_t k = 0; k < penalized; ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      grad[i] += 2.0 * cfg.l2 * w[i];
      hess(i, i) += 2.0 * cfg.l2;
    }
    if (grad.cwiseAbs().maxCoeff() < cfg.tolerance) {
      result.converged = true;
      break;
    }
    // Jitter keeps the system solvable along unidentified per-attribute shifts.
    hess.diagonal().array() += 1e-10;
    const Eigen::VectorXd step = -hess.ldlt().solve(grad);
    const double slope = grad.dot(step);
    double t = 1.0;
    Eigen::VectorXd candidate = w + step;
    double cand_loss = logit_objective(p, candidate, cfg.l2);
    while (!(cand_loss <= loss + 1e-4 * t * slope) && t > 1e-12) {
      t *= 0.5;
      candidate = w + t * step;
      cand_loss = logit_objective(p, candidate, cfg.l2);
    }
    ++result.iterations;
    if (!std::isfinite(cand_loss)) throw NumericError("linear conjoint fit diverged");
    if (!(cand_loss < loss)) {
      // No further decrease representable in floating point.
      result.converged = true;
      break;
    }
    w = candidate;
    loss = cand_loss;
    result.loss_history.push_back(loss);
  }
  result.final_loss = loss;
  return w;
}

inline bool all_same(std::span<const int> y) {
  for (int v : y)
    if (v != y.front()) return false;
  return true;
}

}  // namespace detail

// Binary logit on utility differences: P(A) = sigmoid(U(x_A) - U(x_B)).
inline FitResult fit(const AttributeSchema& schema, std::span<const ChoicePair> pairs, const FitConfig& cfg = {}) {
  if (pairs.empty()) throw ValidationError("fit: no choice data");
  detail::LogitProblem p;
  p.dim = schema.width();
  for (const auto& pr : pairs) {
    pr.a.check(schema);
    pr.b.check(schema);
    if (pr.y != 0 && pr.y != 1) throw ValidationError("fit: target not in {0,1}");
    detail::SparseRow row;
    for (std::size_t i = 0; i < schema.attribute_count(); ++i) {
      if (pr.a.level(i) == pr.b.level(i)) continue;
      row.emplace_back(schema.offset(i) + pr.a.level(i), 1.0);
      row.emplace_back(schema.offset(i) + pr.b.level(i), -1.0);
    }
    p.rows.push_back(std::move(row));
    p.y.push_back(pr.y);
  }
  FitResult result;
  result.degenerate_targets = detail::all_same(p.y);
  const Eigen::VectorXd w = detail::solve_logit(p, cfg, result);
  result.partworths = effects_code(PartworthTable::from_flat(schema, std::span<const double>(w.data(), p.dim)));
  return result;
}

// Single-vector logit with intercept: P(y=1) = sigmoid(b + U(x)).
inline FitResult fit_single(const AttributeSchema& schema, std::span<const LabeledItem> items,
                            const FitConfig& cfg = {}) {
  if (items.empty()) throw ValidationError("fit_single: no data");
  detail::LogitProblem p;
  p.dim = schema.width() + 1;
  p.intercept = true;
  for (const auto& it : items) {
    it.x.check(schema);
    if (it.y != 0 && it.y != 1) throw ValidationError("fit_single: target not in {0,1}");
    detail::SparseRow row;
    for (std::size_t i = 0; i < schema.attribute_count(); ++i) row.emplace_back(schema.offset(i) + it.x.level(i), 1.0);
    row.emplace_back(schema.width(), 1.0);
    p.rows.push_back(std::move(row));
    p.y.push_back(it.y);
  }
  FitResult result;
  result.degenerate_targets = detail::all_same(p.y);
  const Eigen::VectorXd w = detail::solve_logit(p, cfg, result);
  const auto raw = PartworthTable::from_flat(schema, std::span<const double>(w.data(), schema.width()));
  result.intercept = w[static_cast<Eigen::Index>(schema.width())] + effects_offset(raw);
  result.partworths = effects_code(raw);
  return result;
}

inline double choice_probability(const PartworthTable& w, const ItemVector& a, const ItemVector& b) {
  return sigmoid(utility(w, a) - utility(w, b));
}

// A fitted linear conjoint model usable wherever a choice model is expected.
class LinearConjoint {
 public:
  LinearConjoint() = default;
  LinearConjoint(PartworthTable partworths, double intercept, Pairing pairing)
      : partworths_(std::move(partworths)), intercept_(intercept), pairing_(pairing),
        flat_(partworths_.flat()) {}

  const PartworthTable& partworths() const { return partworths_; }
  double intercept() const { return intercept_; }
  Pairing pairing() const { return pairing_; }

  Matrix logits(const ChoiceBatch& batch) const {
    const std::size_t width = flat_.size();
    if (pairing_ == Pairing::Pairwise && batch.option_count() != 2)
      throw ValidationError("pairwise linear conjoint needs two options");
    if (pairing_ == Pairing::SingleVector && batch.option_count() != 1)
      throw ValidationError("single-vector linear conjoint needs one option");
    for (const auto& m : batch.options)
      if (m.cols() != width) throw ShapeError("linear conjoint: input width " + std::to_string(m.cols()));
    Matrix out(batch.size(), 1);
    for (std::size_t r = 0; r < batch.size(); ++r) {
      double z = pairing_ == Pairing::Pairwise ? 0.0 : intercept_;
      for (std::size_t c = 0; c < width; ++c) {
        const double x = pairing_ == Pairing::Pairwise ? batch.options[0](r, c) - batch.options[1](r, c)
                                                       : batch.options[0](r, c);
        z += flat_[c] * x;
      }
      out(r, 0) = z;
    }
    return out;
  }

  nlohmann::json to_json() const {
    return {{"partworths", partworths_to_json(partworths_)}, {"intercept", intercept_}, {"pairing", to_string(pairing_)}};
  }

  static LinearConjoint from_json(const nlohmann::json& j) {
    return LinearConjoint(partworths_from_json(j.at("partworths")), j.at("intercept").get<double>(),
                          pairing_from_string(j.at("pairing").get<std::string>()));
  }

 private:
  PartworthTable partworths_;
  double intercept_ = 0.0;
  Pairing pairing_ = Pairing::Pairwise;
  std::vector<double> flat_;
};

}  // namespace conjointnet
