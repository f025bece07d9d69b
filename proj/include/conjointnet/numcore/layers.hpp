#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "conjointnet/numcore/matrix.hpp"

namespace conjointnet {

enum class Mode { Train, Infer };

enum class LayerKind { Dense, ReLU, Sigmoid, BatchNorm };

inline const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "Dense";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Sigmoid: return "Sigmoid";
    case LayerKind::BatchNorm: return "BatchNorm";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "Dense") return LayerKind::Dense;
  if (s == "ReLU") return LayerKind::ReLU;
  if (s == "Sigmoid") return LayerKind::Sigmoid;
  if (s == "BatchNorm") return LayerKind::BatchNorm;
  throw ValidationError("unknown layer kind '" + s + "'");
}

struct LayerSpec {
  LayerKind kind;
  std::size_t in_dim;
  std::size_t out_dim;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// A trainable tensor and its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  // Frozen parameters are skipped by the optimizer (gradients still get cleared).
  bool frozen = false;
  // Multiplier on the optimizer learning rate for this tensor.
  double lr_scale = 1.0;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(0.0); }
};

// y = x W + b, W stored (in x out).
class Dense {
 public:
  Dense(std::size_t in_dim, std::size_t out_dim, bool with_bias = true)
      : weight_("weight", Matrix(in_dim, out_dim)), has_bias_(with_bias) {
    if (in_dim == 0 || out_dim == 0) throw ValidationError("Dense layer dims must be positive");
    if (has_bias_) bias_ = Parameter("bias", Matrix(1, out_dim));
  }

  // Glorot-uniform weights, zero bias.
  Dense(std::size_t in_dim, std::size_t out_dim, Rng& rng, bool with_bias = true)
      : Dense(in_dim, out_dim, with_bias) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : weight_.value.data()) w = dist(rng);
  }

  LayerSpec spec() const { return {LayerKind::Dense, in_dim(), out_dim()}; }
  std::size_t in_dim() const { return weight_.value.rows(); }
  std::size_t out_dim() const { return weight_.value.cols(); }
  bool has_bias() const { return has_bias_; }

  Parameter& weight() { return weight_; }
  const Parameter& weight() const { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& bias() const { return bias_; }

  Matrix infer(const Matrix& x) const {
    Matrix y = matmul(x, weight_.value);
    if (has_bias_) {
      const auto b = bias_.value.row(0);
      for (std::size_t r = 0; r < y.rows(); ++r) {
        auto row = y.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
      }
    }
    return y;
  }

  Matrix forward(const Matrix& x, Mode mode) {
    if (mode == Mode::Train) cached_input_ = x;
    return infer(x);
  }

  Matrix backward(const Matrix& upstream) {
    if (!cached_input_) throw ProtocolError("Dense::backward without a Train-mode forward");
    const Matrix& x = *cached_input_;
    if (upstream.rows() != x.rows() || upstream.cols() != out_dim())
      throw ShapeError("Dense::backward upstream " + upstream.shape_string());
    Matrix dw = matmul_tn(x, upstream);
    auto wg = weight_.grad.data();
    for (std::size_t i = 0; i < wg.size(); ++i) wg[i] += dw.data()[i];
    if (has_bias_) {
      auto bg = bias_.grad.row(0);
      for (std::size_t r = 0; r < upstream.rows(); ++r) {
        const auto g = upstream.row(r);
        for (std::size_t c = 0; c < g.size(); ++c) bg[c] += g[c];
      }
    }
    Matrix dx = matmul_nt(upstream, weight_.value);
    cached_input_.reset();
    return dx;
  }

  void reset_cache() { cached_input_.reset(); }

  void collect(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
  }
  void collect(std::vector<const Parameter*>& out) const {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
  }

 private:
  Parameter weight_;
  Parameter bias_;
  bool has_bias_;
  std::optional<Matrix> cached_input_;
};

class ReLU {
 public:
  explicit ReLU(std::size_t dim) : dim_(dim) {}

  LayerSpec spec() const { return {LayerKind::ReLU, dim_, dim_}; }
  std::size_t in_dim() const { return dim_; }
  std::size_t out_dim() const { return dim_; }

  Matrix infer(const Matrix& x) const {
    Matrix y = x;
    for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
    return y;
  }

  Matrix forward(const Matrix& x, Mode mode) {
    if (mode == Mode::Train) cached_input_ = x;
    return infer(x);
  }

  Matrix backward(const Matrix& upstream) {
    if (!cached_input_) throw ProtocolError("ReLU::backward without a Train-mode forward");
    require_same_shape(upstream, *cached_input_, "ReLU::backward");
    Matrix dx = upstream;
    const auto x = cached_input_->data();
    auto d = dx.data();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (!(x[i] > 0.0)) d[i] = 0.0;
    cached_input_.reset();
    return dx;
  }

  void reset_cache() { cached_input_.reset(); }

  void collect(std::vector<Parameter*>&) {}
  void collect(std::vector<const Parameter*>&) const {}

 private:
  std::size_t dim_;
  std::optional<Matrix> cached_input_;
};

class Sigmoid {
 public:
  explicit Sigmoid(std::size_t dim) : dim_(dim) {}

  LayerSpec spec() const { return {LayerKind::Sigmoid, dim_, dim_}; }
  std::size_t in_dim() const { return dim_; }
  std::size_t out_dim() const { return dim_; }

  Matrix infer(const Matrix& x) const {
    Matrix y = x;
    for (double& v : y.data()) v = sigmoid(v);
    return y;
  }

  Matrix forward(const Matrix& x, Mode mode) {
    Matrix y = infer(x);
    if (mode == Mode::Train) cached_output_ = y;
    return y;
  }

  Matrix backward(const Matrix& upstream) {
    if (!cached_output_) throw ProtocolError("Sigmoid::backward without a Train-mode forward");
    require_same_shape(upstream, *cached_output_, "Sigmoid::backward");
    Matrix dx = upstream;
    const auto y = cached_output_->data();
    auto d = dx.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= y[i] * (1.0 - y[i]);
    cached_output_.reset();
    return dx;
  }

  void reset_cache() { cached_output_.reset(); }

  void collect(std::vector<Parameter*>&) {}
  void collect(std::vector<const Parameter*>&) const {}

 private:
  std::size_t dim_;
  std::optional<Matrix> cached_output_;
};

// Per-feature batch normalization with learned scale/shift.
// Train mode normalizes with batch statistics and updates the running estimates;
// Infer mode uses the running estimates only.
class BatchNorm {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEpsilon = 1e-5;

  explicit BatchNorm(std::size_t dim)
      : gamma_("gamma", Matrix(1, dim, 1.0)),
        beta_("beta", Matrix(1, dim, 0.0)),
        running_mean_(1, dim, 0.0),
        running_var_(1, dim, 1.0) {}

  LayerSpec spec() const { return {LayerKind::BatchNorm, dim(), dim()}; }
  std::size_t dim() const { return gamma_.value.cols(); }
  std::size_t in_dim() const { return dim(); }
  std::size_t out_dim() const { return dim(); }

  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }
  const Parameter& gamma() const { return gamma_; }
  const Parameter& beta() const { return beta_; }
  Matrix& running_mean() { return running_mean_; }
  Matrix& running_var() { return running_var_; }
  const Matrix& running_mean() const { return running_mean_; }
  const Matrix& running_var() const { return running_var_; }

  Matrix infer(const Matrix& x) const {
    Matrix y(x.rows(), x.cols());
    const std::size_t d = dim();
    for (std::size_t c = 0; c < d; ++c) {
      const double inv_std = 1.0 / std::sqrt(running_var_(0, c) + kEpsilon);
      const double g = gamma_.value(0, c), b = beta_.value(0, c), mu = running_mean_(0, c);
      for (std::size_t r = 0; r < x.rows(); ++r) y(r, c) = g * (x(r, c) - mu) * inv_std + b;
    }
    return y;
  }

  Matrix forward(const Matrix& x, Mode mode) {
    if (mode == Mode::Infer) return infer(x);
    const std::size_t n = x.rows();
    const std::size_t d = dim();
    if (n == 0) throw ShapeError("BatchNorm: empty batch");
    Cache cache{Matrix(n, d), std::vector<double>(d)};
    Matrix y(n, d);
    for (std::size_t c = 0; c < d; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < n; ++r) mean += x(r, c);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t r = 0; r < n; ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
      var /= static_cast<double>(n);
      const double inv_std = 1.0 / std::sqrt(var + kEpsilon);
      cache.inv_std[c] = inv_std;
      for (std::size_t r = 0; r < n; ++r) {
        const double xh = (x(r, c) - mean) * inv_std;
        cache.x_hat(r, c) = xh;
        y(r, c) = gamma_.value(0, c) * xh + beta_.value(0, c);
      }
      const double unbiased = n > 1 ? var * static_cast<double>(n) / static_cast<double>(n - 1) : var;
      running_mean_(0, c) = (1.0 - kMomentum) * running_mean_(0, c) + kMomentum * mean;
      running_var_(0, c) = (1.0 - kMomentum) * running_var_(0, c) + kMomentum * unbiased;
    }
    cache_ = std::move(cache);
    return y;
  }

  Matrix backward(const Matrix& upstream) {
    if (!cache_) throw ProtocolError("BatchNorm::backward without a Train-mode forward");
    const Matrix& xh = cache_->x_hat;
    require_same_shape(upstream, xh, "BatchNorm::backward");
    const std::size_t n = xh.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    Matrix dx(n, dim());
    for (std::size_t c = 0; c < dim(); ++c) {
      double sum_dy = 0.0, sum_dy_xh = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        sum_dy += upstream(r, c);
        sum_dy_xh += upstream(r, c) * xh(r, c);
      }
      gamma_.grad(0, c) += sum_dy_xh;
      beta_.grad(0, c) += sum_dy;
      const double g = gamma_.value(0, c) * cache_->inv_std[c];
      for (std::size_t r = 0; r < n; ++r)
        dx(r, c) = g * (upstream(r, c) - inv_n * sum_dy - xh(r, c) * inv_n * sum_dy_xh);
    }
    cache_.reset();
    return dx;
  }

  void reset_cache() { cache_.reset(); }

  void collect(std::vector<Parameter*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }
  void collect(std::vector<const Parameter*>& out) const {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

 private:
  struct Cache {
    Matrix x_hat;
    std::vector<double> inv_std;
  };

  Parameter gamma_;
  Parameter beta_;
  Matrix running_mean_;
  Matrix running_var_;
  std::optional<Cache> cache_;
};

}  // namespace conjointnet
