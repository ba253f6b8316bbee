#include "wsod/oicr.hpp"

#include <algorithm>
#include <cmath>

#include "wsod/error.hpp"
#include "wsod/kernels.hpp"

namespace wsod {

Matrix refine_scores(const ProposalSet& proposals, const AffineLayer& head) {
  Matrix logits, probs;
  kernels::omp::affine_forward(proposals.features, head, logits);
  kernels::omp::softmax_rows(logits, probs);
  if (!all_finite(probs.data)) throw NonFiniteScore("non-finite refinement score for image " + proposals.image_id);
  return probs;
}

Matrix generate_instance_targets(std::span<const Box> boxes, const Matrix& scores,
                                 const LabelSet& labels, double threshold) {
  const std::size_t m = boxes.size();
  if (scores.rows != m || scores.cols < 1)
    throw ShapeMismatch("generate_instance_targets: score matrix does not match proposals");
  const std::size_t C = scores.cols - 1;

  // Top proposal per present class.
  std::vector<std::size_t> classes, tops;
  for (const int c : labels.present) {
    if (c < 0 || static_cast<std::size_t>(c) >= C) throw ShapeMismatch("label index out of range");
    std::size_t best = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (scores(i, static_cast<std::size_t>(c)) > scores(best, static_cast<std::size_t>(c))) best = i;
    classes.push_back(static_cast<std::size_t>(c));
    tops.push_back(best);
  }
  std::vector<Box> top_boxes;
  for (const auto j : tops) top_boxes.push_back(boxes[j]);
  Matrix overlap;  // m x |present|
  kernels::omp::iou_matrix(boxes, top_boxes, overlap);

  Matrix y(m, C + 1);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t count = 0;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      if (i == tops[k] || overlap(i, k) > threshold) {
        y(i, classes[k]) = 1.0;
        ++count;
      }
    }
    if (count == 0) {
      y(i, C) = 1.0;
      continue;
    }
    // Classes are distinct, so count is the row's foreground total.
    const double t = static_cast<double>(count);
    for (std::size_t c = 0; c < C; ++c) y(i, c) /= t;
  }
  return y;
}

double oicr_loss(const Matrix& scores, const Matrix& targets) {
  if (!scores.same_shape(targets)) throw ShapeMismatch("oicr_loss: shape mismatch");
  if (scores.rows == 0) return 0.0;
  double loss = 0.0;
  for (std::size_t k = 0; k < scores.data.size(); ++k)
    if (targets.data[k] != 0.0) loss -= targets.data[k] * std::log(std::max(scores.data[k], kProbEpsilon));
  return loss / static_cast<double>(scores.rows);
}

Matrix oicr_loss_backward(const Matrix& scores, const Matrix& targets) {
  if (!scores.same_shape(targets)) throw ShapeMismatch("oicr_loss_backward: shape mismatch");
  const std::size_t m = scores.rows, K = scores.cols;
  Matrix d(m, K);
  if (m == 0) return d;
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<double> ds(K);
  for (std::size_t i = 0; i < m; ++i) {
    double dot = 0.0;
    for (std::size_t c = 0; c < K; ++c) {
      const double s = scores(i, c);
      ds[c] = (targets(i, c) != 0.0 && s > kProbEpsilon) ? -targets(i, c) * inv_m / s : 0.0;
      dot += ds[c] * s;
    }
    // Softmax Jacobian-vector product.
    for (std::size_t c = 0; c < K; ++c) d(i, c) = scores(i, c) * (ds[c] - dot);
  }
  return d;
}

double total_loss(double mid, std::span<const double> refinement_losses) {
  double total = mid;
  for (const double l : refinement_losses) total += l;
  return total;
}

Matrix inference_scores(const ProposalSet& proposals, const ScoreBundle& mil,
                        const RefinementStack& stack, ScoreAggregation mode) {
  const std::size_t m = mil.num_proposals(), C = mil.num_classes();
  Matrix out(m, C);
  if (stack.heads.empty()) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t c = 0; c < C; ++c) out(i, c) = mil.cls_probs(i, c) * mil.det_probs(i, c);
    return out;
  }
  const std::size_t first = mode == ScoreAggregation::last_head ? stack.heads.size() - 1 : 0;
  const std::size_t used = stack.heads.size() - first;
  for (std::size_t k = first; k < stack.heads.size(); ++k) {
    if (stack.heads[k].out_dim() != C + 1) throw ShapeMismatch("refinement head width does not match C + 1");
    const auto s = refine_scores(proposals, stack.heads[k]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t c = 0; c < C; ++c) out(i, c) += s(i, c);
  }
  for (double& v : out.data) v /= static_cast<double>(used);
  return out;
}

}  // namespace wsod
