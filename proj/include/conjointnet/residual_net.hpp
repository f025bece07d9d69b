#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "conjointnet/conjoint/linear.hpp"
#include "conjointnet/numcore/network.hpp"
#include "conjointnet/numcore/serialize.hpp"
#include "conjointnet/training.hpp"

namespace conjointnet {

struct ResidualConfig {
  std::size_t hidden_nodes = 16;
  Pairing pairing = Pairing::Pairwise;
  // Initial f-path output weights are uniform(-scale, scale); 0 starts from the pure linear model.
  double residual_scale = 0.0;
  double residual_l2 = 1e-4;
  double linear_l2 = 1e-4;
  // Pins f(x) = 0 so the model reduces to the linear conjoint.
  bool freeze_residual = false;
  // Fit the linear path to convergence before joint training, so f starts
  // from the linear conjoint solution and only picks up what it misses.
  bool warm_start_linear = true;
};

inline nlohmann::json residual_config_to_json(const ResidualConfig& c) {
  return {{"hidden_nodes", c.hidden_nodes},     {"pairing", to_string(c.pairing)}, {"residual_scale", c.residual_scale},
          {"residual_l2", c.residual_l2},       {"linear_l2", c.linear_l2},       {"freeze_residual", c.freeze_residual},
          {"warm_start_linear", c.warm_start_linear}};
}

inline ResidualConfig residual_config_from_json(const nlohmann::json& j, ResidualConfig c = {}) {
  c.hidden_nodes = j.value("hidden_nodes", c.hidden_nodes);
  if (j.contains("pairing")) c.pairing = pairing_from_string(j.at("pairing").get<std::string>());
  c.residual_scale = j.value("residual_scale", c.residual_scale);
  c.residual_l2 = j.value("residual_l2", c.residual_l2);
  c.linear_l2 = j.value("linear_l2", c.linear_l2);
  c.freeze_residual = j.value("freeze_residual", c.freeze_residual);
  c.warm_start_linear = j.value("warm_start_linear", c.warm_start_linear);
  return c;
}

// H(x) = U(x) + f(x); `total` is the floating sum of the two path outputs.
struct UtilityDecomposition {
  double total = 0.0;
  double linear = 0.0;
  double residual = 0.0;
};

// Linear partworth path U(x) = w.x (plus an intercept in single-vector mode)
// alongside a one-hidden-layer ReLU path f(x), summed into the item utility.
class ResidualNet {
 public:
  ResidualNet(std::size_t input_dim, ResidualConfig config, Rng& rng)
      : config_(config), linear_(input_dim, 1, rng, single()) {
    if (config_.hidden_nodes == 0) throw ValidationError("hidden_nodes must be >= 1");
    if (config_.residual_scale < 0.0) throw ValidationError("residual_scale must be non-negative");
    // The partworth path starts at zero: the logit MLE has no preferred scale.
    linear_.weight().value.fill(0.0);
    residual_.add(Dense(input_dim, config_.hidden_nodes, rng));
    residual_.add(ReLU(config_.hidden_nodes));
    Dense out(config_.hidden_nodes, 1, single());
    if (config_.residual_scale > 0.0) {
      std::uniform_real_distribution<double> dist(-config_.residual_scale, config_.residual_scale);
      for (double& w : out.weight().value.data()) w = dist(rng);
    }
    residual_.add(std::move(out));
    apply_freeze();
  }

  const ResidualConfig& config() const { return config_; }
  std::size_t input_dim() const { return linear_.in_dim(); }
  Dense& linear_path() { return linear_; }
  const Dense& linear_path() const { return linear_; }
  Sequential& residual_path() { return residual_; }
  const Sequential& residual_path() const { return residual_; }

  void zero_residual_output() {
    auto& out = std::get<Dense>(residual_.layers().back());
    out.weight().value.fill(0.0);
    if (out.has_bias()) out.bias().value.fill(0.0);
  }

  void zero_linear() {
    linear_.weight().value.fill(0.0);
    if (linear_.has_bias()) linear_.bias().value.fill(0.0);
  }

  std::vector<UtilityDecomposition> decompose(const Matrix& items) const {
    check_width(items);
    const Matrix u = linear_.infer(items);
    const Matrix f = residual_.infer(items);
    std::vector<UtilityDecomposition> out;
    out.reserve(items.rows());
    for (std::size_t r = 0; r < items.rows(); ++r) out.push_back({u(r, 0) + f(r, 0), u(r, 0), f(r, 0)});
    return out;
  }

  UtilityDecomposition forward_decomposed(const ItemVector& x, const AttributeSchema& schema) const {
    return decompose(Matrix::row_vector(x.one_hot(schema))).front();
  }

  Matrix utilities(const Matrix& items) const {
    check_width(items);
    Matrix h = linear_.infer(items);
    const Matrix f = residual_.infer(items);
    for (std::size_t r = 0; r < h.rows(); ++r) h(r, 0) += f(r, 0);
    return h;
  }

  // Pairwise: H(A) - H(B). Single vector: H(x).
  Matrix logits(const ChoiceBatch& batch) const {
    check_batch(batch);
    if (single()) return utilities(batch.options[0]);
    const Matrix ha = utilities(batch.options[0]);
    const Matrix hb = utilities(batch.options[1]);
    Matrix out(batch.size(), 1);
    for (std::size_t r = 0; r < batch.size(); ++r) out(r, 0) = ha(r, 0) - hb(r, 0);
    return out;
  }

  double train_step(const ChoiceBatch& batch) { return objective(batch, true); }

  // Mean BCE plus L2 penalties on the linear weights and the f-path weights.
  double objective(const ChoiceBatch& batch, bool accumulate) {
    check_batch(batch);
    const std::size_t n = batch.size();
    const Matrix x = single() ? batch.options[0] : vstack(batch.options);
    const Matrix u = linear_.forward(x, Mode::Train);
    const Matrix f = residual_.forward(x, Mode::Train);
    Matrix logit(n, 1);
    for (std::size_t r = 0; r < n; ++r) {
      const double ha = u(r, 0) + f(r, 0);
      logit(r, 0) = single() ? ha : ha - (u(n + r, 0) + f(n + r, 0));
    }
    const LossResult bce = bce_with_logits(logit, batch.target_matrix());
    double loss = bce.loss + penalty();
    if (!accumulate) {
      linear_.reset_cache();
      residual_.reset_caches();
      return loss;
    }
    Matrix dh(x.rows(), 1);
    for (std::size_t r = 0; r < n; ++r) {
      dh(r, 0) = bce.grad(r, 0);
      if (!single()) dh(n + r, 0) = -bce.grad(r, 0);
    }
    linear_.backward(dh);
    residual_.backward(dh);
    add_penalty_grad();
    return loss;
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    linear_.collect(out);
    for (auto* p : residual_.parameters()) out.push_back(p);
    return out;
  }

  // Linear-path weights as an effects-coded partworth table.
  PartworthTable extract_linear_partworths(const AttributeSchema& schema) const {
    if (schema.width() != input_dim()) throw ShapeError("extract_linear_partworths: schema width mismatch");
    const auto w = linear_.weight().value.data();
    return effects_code(PartworthTable::from_flat(schema, w));
  }

  nlohmann::json to_json() const {
    Sequential lin;
    lin.add(linear_);
    return {{"config", residual_config_to_json(config_)},
            {"linear", network_to_json(lin)},
            {"residual", network_to_json(residual_)}};
  }

  static ResidualNet from_json(const nlohmann::json& j) {
    const ResidualConfig cfg = residual_config_from_json(j.at("config"));
    Sequential lin = network_from_json(j.at("linear"));
    Sequential res = network_from_json(j.at("residual"));
    if (lin.size() != 1 || res.size() != 3) throw DataError("residual checkpoint has unexpected layer count");
    Rng unused(0);
    ResidualNet net(lin.in_dim(), cfg, unused);
    net.linear_ = std::get<Dense>(lin.layers().front());
    net.residual_ = std::move(res);
    if (net.residual_.in_dim() != net.linear_.in_dim() || net.residual_.out_dim() != 1)
      throw ShapeError("residual checkpoint path widths disagree");
    net.apply_freeze();
    return net;
  }

 private:
  bool single() const { return config_.pairing == Pairing::SingleVector; }

  void apply_freeze() {
    if (!config_.freeze_residual) return;
    zero_residual_output();
    residual_.set_frozen(true);
  }

  double penalty() const {
    double s = 0.0;
    for (double w : linear_.weight().value.data()) s += config_.linear_l2 * w * w;
    for (const auto* p : residual_.parameters())
      if (p->name == "weight")
        for (double w : p->value.data()) s += config_.residual_l2 * w * w;
    return s;
  }

  void add_penalty_grad() {
    auto& lw = linear_.weight();
    for (std::size_t i = 0; i < lw.value.size(); ++i) lw.grad.data()[i] += 2.0 * config_.linear_l2 * lw.value.data()[i];
    for (auto* p : residual_.parameters())
      if (p->name == "weight")
        for (std::size_t i = 0; i < p->value.size(); ++i)
          p->grad.data()[i] += 2.0 * config_.residual_l2 * p->value.data()[i];
  }

  void check_width(const Matrix& items) const {
    if (items.cols() != input_dim())
      throw ShapeError("residual net: input width " + std::to_string(items.cols()) + " != " +
                       std::to_string(input_dim()));
  }

  void check_batch(const ChoiceBatch& batch) const {
    const std::size_t expected = single() ? 1 : 2;
    if (batch.option_count() != expected)
      throw ShapeError("residual net (" + std::string(to_string(config_.pairing)) + ") expects " +
                       std::to_string(expected) + " option(s), got " + std::to_string(batch.option_count()));
    for (const auto& m : batch.options) {
      check_width(m);
      if (m.rows() != batch.size()) throw ShapeError("residual net: option rows disagree with target count");
    }
  }

  ResidualConfig config_;
  Dense linear_;
  Sequential residual_;
};

// Newton fit of U alone on `batch` (same logit and L2 as the joint objective),
// written into the linear path. Returns the solver record.
inline FitResult warm_start_linear(ResidualNet& model, const ChoiceBatch& batch) {
  const bool single = model.config().pairing == Pairing::SingleVector;
  if (batch.size() == 0) throw ValidationError("warm_start_linear: empty batch");
  if (batch.option_count() != (single ? 1u : 2u)) throw ShapeError("warm_start_linear: option count mismatch");
  const std::size_t in = model.input_dim();
  detail::LogitProblem p;
  p.dim = in + (single ? 1 : 0);
  p.intercept = single;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    detail::SparseRow row;
    for (std::size_t c = 0; c < in; ++c) {
      const double v = single ? batch.options[0](r, c) : batch.options[0](r, c) - batch.options[1](r, c);
      if (v != 0.0) row.emplace_back(c, v);
    }
    if (single) row.emplace_back(in, 1.0);
    p.rows.push_back(std::move(row));
    p.y.push_back(batch.targets[r]);
  }
  FitConfig cfg;
  cfg.l2 = model.config().linear_l2;
  FitResult result;
  result.degenerate_targets = detail::all_same(p.y);
  const Eigen::VectorXd w = detail::solve_logit(p, cfg, result);
  auto& lin = model.linear_path();
  for (std::size_t c = 0; c < in; ++c) lin.weight().value(c, 0) = w[static_cast<Eigen::Index>(c)];
  if (single) lin.bias().value(0, 0) = w[static_cast<Eigen::Index>(in)];
  return result;
}

inline TrainReport train_residual(ResidualNet& model, const ChoiceBatch& train, const ChoiceBatch& val,
                                  const TrainConfig& config) {
  if (config.max_epochs > 100) throw ValidationError("train_residual: max_epochs is capped at 100");
  if (model.config().warm_start_linear && train.size() > 0) warm_start_linear(model, train);
  return train_classifier(model, train, val, config, "residual");
}

struct ResidualDiagnostics {
  std::size_t n = 0;
  double mean_f = 0.0;
  double std_f = 0.0;
  double min_f = 0.0;
  double max_f = 0.0;
  double mean_abs_f = 0.0;
  double mean_abs_u_centered = 0.0;
  // mean|f| / (mean|f| + mean|U - mean U|); 0 when both are 0.
  double residual_share = 0.0;
  std::vector<std::size_t> top_items;  // by |f|, descending
  std::vector<UtilityDecomposition> items;
};

inline ResidualDiagnostics residual_diagnostics(const ResidualNet& model, const Matrix& items, std::size_t top_n = 10) {
  if (items.rows() == 0) throw ValidationError("residual_diagnostics: no items");
  ResidualDiagnostics d;
  d.items = model.decompose(items);
  d.n = d.items.size();
  const double n = static_cast<double>(d.n);
  double mean_u = 0.0;
  d.min_f = d.max_f = d.items.front().residual;
  for (const auto& it : d.items) {
    mean_u += it.linear;
    d.mean_f += it.residual;
    d.mean_abs_f += std::abs(it.residual);
    d.min_f = std::min(d.min_f, it.residual);
    d.max_f = std::max(d.max_f, it.residual);
  }
  mean_u /= n;
  d.mean_f /= n;
  d.mean_abs_f /= n;
  double var = 0.0;
  for (const auto& it : d.items) {
    var += (it.residual - d.mean_f) * (it.residual - d.mean_f);
    d.mean_abs_u_centered += std::abs(it.linear - mean_u);
  }
  d.std_f = std::sqrt(var / n);
  d.mean_abs_u_centered /= n;
  const double denom = d.mean_abs_f + d.mean_abs_u_centered;
  d.residual_share = denom > 0.0 ? d.mean_abs_f / denom : 0.0;

  std::vector<std::size_t> order(d.n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(d.items[a].residual) > std::abs(d.items[b].residual);
  });
  order.resize(std::min(top_n, order.size()));
  d.top_items = std::move(order);
  return d;
}

inline void write_diagnostics_csv(std::ostream& os, const ResidualDiagnostics& d) {
  os << "item_id,U,f,H\n" << std::setprecision(17);
  for (std::size_t i = 0; i < d.items.size(); ++i)
    os << i << ',' << d.items[i].linear << ',' << d.items[i].residual << ',' << d.items[i].total << '\n';
}

inline nlohmann::json diagnostics_to_json(const ResidualDiagnostics& d) {
  return {{"n", d.n},
          {"mean_f", d.mean_f},
          {"std_f", d.std_f},
          {"min_f", d.min_f},
          {"max_f", d.max_f},
          {"mean_abs_f", d.mean_abs_f},
          {"mean_abs_u_centered", d.mean_abs_u_centered},
          {"residual_share", d.residual_share},
          {"top_items", d.top_items}};
}

}  // namespace conjointnet
