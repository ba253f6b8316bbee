#pragma once

// Dense kernels used by the detection and text heads.
//
// Every kernel exists twice: `serial` is the plain reference loop nest and
// `omp` is the OpenMP-parallel version. Both accumulate each output element
// in the same order, so their results are bitwise identical; the unit tests
// and the benchmark rely on that.

#include <span>

#include "wsod/box.hpp"
#include "wsod/tensor.hpp"

namespace wsod::kernels {

namespace serial {

// y(i, o) = sum_k x(i, k) * layer.weight(o, k) + layer.bias[o]
void affine_forward(const Matrix& x, const AffineLayer& layer, Matrix& y);

// Accumulates parameter gradients for dy; writes dx when non-null.
void affine_backward(const Matrix& x, const AffineLayer& layer, const Matrix& dy,
                     AffineLayer& grad, Matrix* dx);

// Softmax over rows within each column (per class across proposals).
void softmax_columns(const Matrix& logits, Matrix& out);

// Softmax over columns within each row (per proposal across classes).
void softmax_rows(const Matrix& logits, Matrix& out);

// out(i, j) = iou(rows[i], cols[j])
void iou_matrix(std::span<const Box> rows, std::span<const Box> cols, Matrix& out);

}  // namespace serial

namespace omp {

void affine_forward(const Matrix& x, const AffineLayer& layer, Matrix& y);
void affine_backward(const Matrix& x, const AffineLayer& layer, const Matrix& dy,
                     AffineLayer& grad, Matrix* dx);
void softmax_columns(const Matrix& logits, Matrix& out);
void softmax_rows(const Matrix& logits, Matrix& out);
void iou_matrix(std::span<const Box> rows, std::span<const Box> cols, Matrix& out);

}  // namespace omp

}  // namespace wsod::kernels
