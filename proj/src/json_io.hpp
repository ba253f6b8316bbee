#pragma once

// JSON helpers shared by the checkpoint writers.

#include <json.hpp>

#include "wsod/error.hpp"
#include "wsod/tensor.hpp"

namespace wsod::detail {

inline nlohmann::json to_json(const Matrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m;
  m.rows = j.at("rows").get<std::size_t>();
  m.cols = j.at("cols").get<std::size_t>();
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) throw ParseError("matrix data size does not match its shape");
  return m;
}

inline nlohmann::json to_json(const AffineLayer& layer) {
  return {{"weight", to_json(layer.weight)}, {"bias", layer.bias}};
}

inline AffineLayer affine_from_json(const nlohmann::json& j) {
  AffineLayer layer;
  layer.weight = matrix_from_json(j.at("weight"));
  layer.bias = j.at("bias").get<std::vector<double>>();
  if (layer.bias.size() != layer.weight.rows) throw ParseError("bias size does not match weight rows");
  return layer;
}

}  // namespace wsod::detail
