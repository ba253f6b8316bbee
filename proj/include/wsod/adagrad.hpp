#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

namespace wsod {

// Per-parameter adaptive step: accum += g^2; p -= lr * g / sqrt(accum).
// Accumulators start at `initial_accumulator` (TensorFlow's default of 0.1).
struct Adagrad {
  double lr = 0.01;
  double initial_accumulator = 0.1;

  void step(std::span<double> params, std::span<const double> grads,
            std::span<double> accum) const {
    if (params.size() != grads.size() || params.size() != accum.size())
      throw std::invalid_argument("Adagrad::step: size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      accum[i] += grads[i] * grads[i];
      params[i] -= lr * grads[i] / std::sqrt(accum[i]);
    }
  }
};

}  // namespace wsod
