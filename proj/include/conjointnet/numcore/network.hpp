#pragma once

#include <string>
#include <variant>
#include <vector>

#include "conjointnet/numcore/layers.hpp"

namespace conjointnet {

using Layer = std::variant<Dense, ReLU, Sigmoid, BatchNorm>;

inline LayerSpec spec_of(const Layer& layer) {
  return std::visit([](const auto& l) { return l.spec(); }, layer);
}

// A fixed sequence of layers: the NetworkModel every learner is built from.
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

  void add(Layer layer) {
    const LayerSpec s = spec_of(layer);
    if (!layers_.empty() && out_dim() != s.in_dim)
      throw ShapeError("layer " + std::to_string(layers_.size()) + " (" + to_string(s.kind) +
                       ") expects width " + std::to_string(s.in_dim) + ", previous layer emits " +
                       std::to_string(out_dim()));
    layers_.push_back(std::move(layer));
  }

  bool empty() const { return layers_.empty(); }
  std::size_t size() const { return layers_.size(); }
  std::size_t in_dim() const { return layers_.empty() ? 0 : spec_of(layers_.front()).in_dim; }
  std::size_t out_dim() const { return layers_.empty() ? 0 : spec_of(layers_.back()).out_dim; }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(spec_of(l));
    return out;
  }

  // Side-effect free; safe to call concurrently on a finalized model.
  Matrix infer(const Matrix& x) const {
    Matrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      check_input(i, h);
      h = std::visit([&](const auto& l) { return l.infer(h); }, layers_[i]);
    }
    return h;
  }

  Matrix forward(const Matrix& x, Mode mode) {
    if (mode == Mode::Infer) return infer(x);
    Matrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      check_input(i, h);
      h = std::visit([&](auto& l) { return l.forward(h, Mode::Train); }, layers_[i]);
    }
    return h;
  }

  Matrix backward(const Matrix& upstream) {
    Matrix g = upstream;
    for (std::size_t i = layers_.size(); i-- > 0;)
      g = std::visit([&](auto& l) { return l.backward(g); }, layers_[i]);
    return g;
  }

  // Drops Train-mode caches left by a forward pass that will not be backpropagated.
  void reset_caches() {
    for (auto& l : layers_) std::visit([](auto& layer) { layer.reset_cache(); }, l);
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_) std::visit([&](auto& layer) { layer.collect(out); }, l);
    return out;
  }

  std::vector<const Parameter*> parameters() const {
    std::vector<const Parameter*> out;
    for (const auto& l : layers_) std::visit([&](const auto& layer) { layer.collect(out); }, l);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  void set_frozen(bool frozen) {
    for (auto* p : parameters()) p->frozen = frozen;
  }

  void set_lr_scale(double scale) {
    for (auto* p : parameters()) p->lr_scale = scale;
  }

 private:
  void validate() const {
    for (std::size_t i = 1; i < layers_.size(); ++i) {
      const auto prev = spec_of(layers_[i - 1]);
      const auto cur = spec_of(layers_[i]);
      if (prev.out_dim != cur.in_dim)
        throw ShapeError("layer " + std::to_string(i) + " (" + to_string(cur.kind) + ") expects width " +
                         std::to_string(cur.in_dim) + ", layer " + std::to_string(i - 1) + " emits " +
                         std::to_string(prev.out_dim));
    }
  }

  void check_input(std::size_t i, const Matrix& h) const {
    const auto s = spec_of(layers_[i]);
    if (h.cols() != s.in_dim)
      throw ShapeError("layer " + std::to_string(i) + " (" + to_string(s.kind) + ") expects " +
                       std::to_string(s.in_dim) + " columns, got " + std::to_string(h.cols()));
  }

  std::vector<Layer> layers_;
};

// Dense(+BatchNorm)+ReLU blocks for each hidden width, then a final Dense to out_dim.
inline Sequential make_mlp(std::size_t in_dim, const std::vector<std::size_t>& hidden, std::size_t out_dim,
                           Rng& rng, bool batch_norm = false) {
  Sequential net;
  std::size_t width = in_dim;
  for (std::size_t h : hidden) {
    net.add(Dense(width, h, rng));
    if (batch_norm) net.add(BatchNorm(h));
    net.add(ReLU(h));
    width = h;
  }
  net.add(Dense(width, out_dim, rng));
  return net;
}

}  // namespace conjointnet
