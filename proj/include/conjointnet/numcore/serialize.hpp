#pragma once

#include <nlohmann/json.hpp>

#include "conjointnet/numcore/network.hpp"

namespace conjointnet {

using Json = nlohmann::json;

inline Json matrix_to_json(const Matrix& m) {
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

inline Matrix matrix_from_json(const Json& j) {
  try {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("data").get<std::vector<double>>());
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed matrix in checkpoint: ") + e.what());
  }
}

inline void load_into(Matrix& target, const Json& j, const char* what) {
  Matrix m = matrix_from_json(j);
  if (!m.same_shape(target))
    throw ShapeError(std::string("checkpoint ") + what + " has shape " + m.shape_string() + ", expected " +
                     target.shape_string());
  target = std::move(m);
}

inline Json layer_to_json(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> Json {
        using T = std::decay_t<decltype(l)>;
        const LayerSpec s = l.spec();
        Json j{{"kind", to_string(s.kind)}, {"in", s.in_dim}, {"out", s.out_dim}};
        if constexpr (std::is_same_v<T, Dense>) {
          j["bias"] = l.has_bias();
          j["weight"] = matrix_to_json(l.weight().value);
          if (l.has_bias()) j["bias_value"] = matrix_to_json(l.bias().value);
        } else if constexpr (std::is_same_v<T, BatchNorm>) {
          j["gamma"] = matrix_to_json(l.gamma().value);
          j["beta"] = matrix_to_json(l.beta().value);
          j["running_mean"] = matrix_to_json(l.running_mean());
          j["running_var"] = matrix_to_json(l.running_var());
        }
        return j;
      },
      layer);
}

inline Layer layer_from_json(const Json& j) {
  try {
    const LayerKind kind = layer_kind_from_string(j.at("kind").get<std::string>());
    const auto in = j.at("in").get<std::size_t>();
    const auto out = j.at("out").get<std::size_t>();
    switch (kind) {
      case LayerKind::Dense: {
        Dense d(in, out, j.at("bias").get<bool>());
        load_into(d.weight().value, j.at("weight"), "Dense weight");
        d.weight().grad = Matrix(in, out);
        if (d.has_bias()) load_into(d.bias().value, j.at("bias_value"), "Dense bias");
        return d;
      }
      case LayerKind::ReLU:
        if (in != out) throw ShapeError("ReLU layer with in != out");
        return ReLU(in);
      case LayerKind::Sigmoid:
        if (in != out) throw ShapeError("Sigmoid layer with in != out");
        return Sigmoid(in);
      case LayerKind::BatchNorm: {
        if (in != out) throw ShapeError("BatchNorm layer with in != out");
        BatchNorm bn(in);
        load_into(bn.gamma().value, j.at("gamma"), "BatchNorm gamma");
        load_into(bn.beta().value, j.at("beta"), "BatchNorm beta");
        load_into(bn.running_mean(), j.at("running_mean"), "BatchNorm running_mean");
        load_into(bn.running_var(), j.at("running_var"), "BatchNorm running_var");
        return bn;
      }
    }
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed layer in checkpoint: ") + e.what());
  }
  throw DataError("unreachable layer kind");
}

inline Json network_to_json(const Sequential& net) {
  Json layers = Json::array();
  for (const auto& l : net.layers()) layers.push_back(layer_to_json(l));
  return Json{{"layers", layers}};
}

inline Sequential network_from_json(const Json& j) {
  std::vector<Layer> layers;
  for (const auto& lj : j.at("layers")) layers.push_back(layer_from_json(lj));
  return Sequential(std::move(layers));
}

}  // namespace conjointnet
