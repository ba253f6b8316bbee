#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace wsod {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool empty() const { return data.empty(); }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// y = W x + b, with W stored as out x in.
struct AffineLayer {
  Matrix weight;
  std::vector<double> bias;

  AffineLayer() = default;
  AffineLayer(std::size_t in, std::size_t out) : weight(out, in), bias(out, 0.0) {}

  std::size_t in_dim() const { return weight.cols; }
  std::size_t out_dim() const { return weight.rows; }

  // Zero bias, weights uniform in [-1/sqrt(in), 1/sqrt(in)].
  template <class Rng>
  void init_uniform(Rng& rng) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim() ? in_dim() : 1));
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (double& w : weight.data) w = dist(rng);
    std::fill(bias.begin(), bias.end(), 0.0);
  }

  void set_zero() {
    std::fill(weight.data.begin(), weight.data.end(), 0.0);
    std::fill(bias.begin(), bias.end(), 0.0);
  }

  friend bool operator==(const AffineLayer&, const AffineLayer&) = default;
};

bool all_finite(std::span<const double> values);

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace wsod
