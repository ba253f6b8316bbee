#include "wsod/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "wsod/error.hpp"

namespace wsod::kernels {

namespace {

void check_affine(const Matrix& x, const AffineLayer& layer) {
  if (x.cols != layer.in_dim() || layer.bias.size() != layer.out_dim())
    throw ShapeMismatch("affine: input has " + std::to_string(x.cols) + " columns, layer expects " +
                        std::to_string(layer.in_dim()));
}

inline void affine_row(const Matrix& x, const AffineLayer& layer, Matrix& y, std::size_t i) {
  const auto xi = x.row(i);
  for (std::size_t o = 0; o < layer.out_dim(); ++o) {
    const auto w = layer.weight.row(o);
    double acc = 0.0;
    for (std::size_t k = 0; k < xi.size(); ++k) acc += xi[k] * w[k];
    y(i, o) = acc + layer.bias[o];
  }
}

// grad.weight row o and grad.bias[o] for one output unit.
inline void affine_grad_unit(const Matrix& x, const Matrix& dy, AffineLayer& grad, std::size_t o,
                             std::vector<double>& scratch) {
  std::fill(scratch.begin(), scratch.end(), 0.0);
  double bsum = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double g = dy(i, o);
    if (g == 0.0) continue;
    bsum += g;
    const auto xi = x.row(i);
    for (std::size_t k = 0; k < x.cols; ++k) scratch[k] += g * xi[k];
  }
  auto gw = grad.weight.row(o);
  for (std::size_t k = 0; k < x.cols; ++k) gw[k] += scratch[k];
  grad.bias[o] += bsum;
}

inline void affine_dx_row(const AffineLayer& layer, const Matrix& dy, Matrix& dx, std::size_t i) {
  auto out = dx.row(i);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t o = 0; o < layer.out_dim(); ++o) {
    const double g = dy(i, o);
    if (g == 0.0) continue;
    const auto w = layer.weight.row(o);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += g * w[k];
  }
}

inline void softmax_column(const Matrix& logits, Matrix& out, std::size_t c) {
  double mx = -INFINITY;
  for (std::size_t i = 0; i < logits.rows; ++i) mx = std::max(mx, logits(i, c));
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double e = std::exp(logits(i, c) - mx);
    out(i, c) = e;
    sum += e;
  }
  for (std::size_t i = 0; i < logits.rows; ++i) out(i, c) /= sum;
}

inline void softmax_row(const Matrix& logits, Matrix& out, std::size_t i) {
  const auto in = logits.row(i);
  auto o = out.row(i);
  const double mx = *std::max_element(in.begin(), in.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < in.size(); ++c) {
    o[c] = std::exp(in[c] - mx);
    sum += o[c];
  }
  for (double& v : o) v /= sum;
}

void prepare_dy(const Matrix& x, const AffineLayer& layer, const Matrix& dy, AffineLayer& grad) {
  check_affine(x, layer);
  if (dy.rows != x.rows || dy.cols != layer.out_dim())
    throw ShapeMismatch("affine_backward: gradient shape does not match output");
  if (!grad.weight.same_shape(layer.weight) || grad.bias.size() != layer.bias.size())
    throw ShapeMismatch("affine_backward: gradient buffer shape does not match layer");
}

}  // namespace

namespace serial {

void affine_forward(const Matrix& x, const AffineLayer& layer, Matrix& y) {
  check_affine(x, layer);
  y = Matrix(x.rows, layer.out_dim());
  for (std::size_t i = 0; i < x.rows; ++i) affine_row(x, layer, y, i);
}

void affine_backward(const Matrix& x, const AffineLayer& layer, const Matrix& dy,
                     AffineLayer& grad, Matrix* dx) {
  prepare_dy(x, layer, dy, grad);
  std::vector<double> scratch(x.cols);
  for (std::size_t o = 0; o < layer.out_dim(); ++o) affine_grad_unit(x, dy, grad, o, scratch);
  if (dx) {
    *dx = Matrix(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) affine_dx_row(layer, dy, *dx, i);
  }
}

void softmax_columns(const Matrix& logits, Matrix& out) {
  out = Matrix(logits.rows, logits.cols);
  if (logits.rows == 0) return;
  for (std::size_t c = 0; c < logits.cols; ++c) softmax_column(logits, out, c);
}

void softmax_rows(const Matrix& logits, Matrix& out) {
  out = Matrix(logits.rows, logits.cols);
  if (logits.cols == 0) return;
  for (std::size_t i = 0; i < logits.rows; ++i) softmax_row(logits, out, i);
}

void iou_matrix(std::span<const Box> rows, std::span<const Box> cols, Matrix& out) {
  out = Matrix(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = iou(rows[i], cols[j]);
}

}  // namespace serial

namespace omp {

void affine_forward(const Matrix& x, const AffineLayer& layer, Matrix& y) {
  check_affine(x, layer);
  y = Matrix(x.rows, layer.out_dim());
  const auto n = static_cast<std::ptrdiff_t>(x.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) affine_row(x, layer, y, static_cast<std::size_t>(i));
}

void affine_backward(const Matrix& x, const AffineLayer& layer, const Matrix& dy,
                     AffineLayer& grad, Matrix* dx) {
  prepare_dy(x, layer, dy, grad);
  const auto units = static_cast<std::ptrdiff_t>(layer.out_dim());
#pragma omp parallel
  {
    std::vector<double> scratch(x.cols);
#pragma omp for schedule(static)
    for (std::ptrdiff_t o = 0; o < units; ++o)
      affine_grad_unit(x, dy, grad, static_cast<std::size_t>(o), scratch);
  }
  if (dx) {
    *dx = Matrix(x.rows, x.cols);
    const auto n = static_cast<std::ptrdiff_t>(x.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) affine_dx_row(layer, dy, *dx, static_cast<std::size_t>(i));
  }
}

void softmax_columns(const Matrix& logits, Matrix& out) {
  out = Matrix(logits.rows, logits.cols);
  if (logits.rows == 0) return;
  const auto n = static_cast<std::ptrdiff_t>(logits.cols);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < n; ++c) softmax_column(logits, out, static_cast<std::size_t>(c));
}

void softmax_rows(const Matrix& logits, Matrix& out) {
  out = Matrix(logits.rows, logits.cols);
  if (logits.cols == 0) return;
  const auto n = static_cast<std::ptrdiff_t>(logits.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) softmax_row(logits, out, static_cast<std::size_t>(i));
}

void iou_matrix(std::span<const Box> rows, std::span<const Box> cols, Matrix& out) {
  out = Matrix(rows.size(), cols.size());
  const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<std::size_t>(i), j) = iou(rows[static_cast<std::size_t>(i)], cols[j]);
}

}  // namespace omp

}  // namespace wsod::kernels

namespace wsod {

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace wsod
